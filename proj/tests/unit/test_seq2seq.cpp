// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "glowcast/data/preprocess.hpp"
#include "glowcast/data/synth.hpp"
#include "glowcast/error.hpp"
#include "glowcast/model/checkpoint.hpp"
#include "glowcast/model/seq2seq.hpp"
#include "glowcast/model/trainer.hpp"
#include "glowcast/numerics/gradcheck.hpp"
#include "glowcast/numerics/ops.hpp"
#include "glowcast/numerics/tape.hpp"
#include "test_util.hpp"

using namespace glowcast;
using glowcast::testing::random_tensor;

namespace {

ModelConfig micro_config() {
  ModelConfig c;
  c.stations = 3;
  c.hidden_width = 4;
  c.heads = 2;
  c.embed_width = 3;
  c.history_len = 4;
  c.horizon = 2;
  c.seed = 17;
  return c;
}

std::vector<Tensor> random_frames(std::size_t steps, std::size_t rows, std::mt19937_64& rng) {
  std::vector<Tensor> out;
  for (std::size_t t = 0; t < steps; ++t) out.push_back(random_tensor({rows, 1}, rng, -2, 2));
  return out;
}

std::vector<double> copy_values(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

void fill(const Tensor& t, double value) {
  Tensor h = t;
  for (double& v : h.mutable_values()) v = value;
}

ForecastBatch random_windows(std::size_t count, const ModelConfig& c, std::mt19937_64& rng) {
  ForecastBatch b;
  b.history_len = c.history_len;
  b.horizon = c.horizon;
  b.stations = c.stations;
  b.history = testing::uniform_values(count * c.history_len * c.stations, rng, -1.5, 1.5);
  b.target = testing::uniform_values(count * c.horizon * c.stations, rng, -1.5, 1.5);
  for (std::size_t i = 0; i < count; ++i)
    b.window_end.push_back(Date{std::chrono::days{static_cast<long>(i)}});
  return b;
}

// Parameter count of the module tree, written out by hand.
std::size_t expected_count(const ModelConfig& c) {
  const std::size_t dx = c.input_width, dh = c.hidden_width, n = c.stations, e = c.embed_width;
  std::size_t total = 2 * n * e;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t in = (l == 0 ? dx : dh) + dh;
    total += 2 * 3 * (in * dh + dh);  // encoder and decoder cells, three gates each
  }
  total += dh * dx + dx;  // readout
  if (c.use_attention) {
    const std::size_t ds = c.attention_source == AttentionSource::kEncoder ? dh : dx;
    total += dh * dh + ds * dh + ds * dh + dh * dh;
    total += c.layers * (2 * dh * dh + dh);
  }
  return total;
}

}  // namespace

TEST_CASE("encode examples") {
  std::mt19937_64 rng(1);
  ModelConfig c = micro_config();
  SUBCASE("zero weights and inputs keep every state at zero") {
    Seq2SeqModel m = Seq2SeqModel::init(c);
    for (const Tensor& p : m.encoder[0].parameters()) fill(p, 0.0);
    std::vector<Tensor> x(c.history_len, Tensor::zeros({3, 1}));
    const Encoding enc = encode(m, derive_adjacency(m.graph), x);
    REQUIRE(enc.states.size() == 4);
    for (const Tensor& s : enc.states)
      for (double v : s.values()) CHECK(v == 0.0);
  }
  SUBCASE("single step") {
    c.history_len = 1;
    const Seq2SeqModel m = Seq2SeqModel::init(c);
    const auto x = random_frames(1, 3, rng);
    const Encoding enc = encode(m, derive_adjacency(m.graph), x);
    REQUIRE(enc.states.size() == 1);
    CHECK(copy_values(enc.states[0]) == copy_values(enc.finals[0]));
  }
  SUBCASE("rollout equals manual steps") {
    c.history_len = 3;
    const Seq2SeqModel m = Seq2SeqModel::init(c);
    const Tensor adj = derive_adjacency(m.graph);
    const auto x = random_frames(3, 3, rng);
    const Encoding enc = encode(m, adj, x);
    Tensor h = Tensor::zeros({3, 4});
    for (std::size_t t = 0; t < 3; ++t) {
      h = gcrn_step(m.encoder[0], adj, x[t], h);
      CHECK(copy_values(enc.states[t]) == copy_values(h));
    }
  }
  SUBCASE("two layers feed each other") {
    c.layers = 2;
    const Seq2SeqModel m = Seq2SeqModel::init(c);
    const Tensor adj = derive_adjacency(m.graph);
    const auto x = random_frames(4, 3, rng);
    const Encoding enc = encode(m, adj, x);
    Tensor h0 = Tensor::zeros({3, 4}), h1 = Tensor::zeros({3, 4});
    for (const Tensor& xt : x) {
      h0 = gcrn_step(m.encoder[0], adj, xt, h0);
      h1 = gcrn_step(m.encoder[1], adj, h0, h1);
    }
    CHECK(copy_values(enc.finals[0]) == copy_values(h0));
    CHECK(copy_values(enc.finals[1]) == copy_values(h1));
    CHECK(copy_values(enc.states.back()) == copy_values(h1));
  }
  SUBCASE("wrong frame count") {
    const Seq2SeqModel m = Seq2SeqModel::init(c);
    CHECK_THROWS_AS(encode(m, derive_adjacency(m.graph), random_frames(3, 3, rng)), DimensionError);
    CHECK_THROWS_AS(encode(m, derive_adjacency(m.graph), random_frames(4, 4, rng)), DimensionError);
  }
}

TEST_CASE("augment_hidden examples") {
  std::mt19937_64 rng(2);
  const std::size_t dh = 3;
  const Tensor h = random_tensor({2, dh}, rng), ctx = random_tensor({2, dh}, rng);
  auto block = [&](bool top) {
    std::vector<double> w(2 * dh * dh, 0.0);
    for (std::size_t i = 0; i < dh; ++i) w[((top ? 0 : dh) + i) * dh + i] = 1.0;
    return Affine{Tensor::from({2 * dh, dh}, w), Tensor::zeros({dh})};
  };
  CHECK(copy_values(augment_hidden(block(true), h, ctx)) == copy_values(h));
  CHECK(copy_values(augment_hidden(block(false), h, ctx)) == copy_values(ctx));

  const Affine proj{random_tensor({2 * dh, dh}, rng), random_tensor({dh}, rng)};
  const Tensor out = augment_hidden(proj, h, ctx);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t j = 0; j < dh; ++j) {
      double expect = proj.bias.values()[j];
      for (std::size_t i = 0; i < dh; ++i)
        expect += h.at(r, i) * proj.weight.at(i, j) + ctx.at(r, i) * proj.weight.at(dh + i, j);
      CHECK(std::fabs(out.at(r, j) - expect) < 1e-12);
    }
  CHECK_THROWS_AS(augment_hidden(proj, h, random_tensor({3, dh}, rng)), DimensionError);
}

TEST_CASE("decode examples") {
  std::mt19937_64 rng(3);
  ModelConfig c = micro_config();
  c.horizon = 4;
  const Seq2SeqModel m = Seq2SeqModel::init(c);
  const Tensor adj = derive_adjacency(m.graph);
  const std::vector<Tensor> h0{random_tensor({3, 4}, rng)};
  const Tensor first = random_tensor({3, 1}, rng);
  const auto teacher = random_frames(4, 3, rng);

  SUBCASE("full teacher forcing feeds the teacher frames") {
    const auto out = decode(m, adj, h0, first, 4, teacher, 1.0, nullptr);
    Tensor h = h0[0];
    for (std::size_t k = 0; k < 4; ++k) {
      h = gcrn_step(m.decoder[0], adj, k == 0 ? first : teacher[k - 1], h);
      CHECK(copy_values(out[k]) == copy_values(apply(m.readout, h)));
    }
  }
  SUBCASE("free running ignores the teacher") {
    const auto a = decode(m, adj, h0, first, 4, teacher, 0.0, nullptr);
    const auto b = decode(m, adj, h0, first, 4, random_frames(4, 3, rng), 0.0, nullptr);
    const auto none = decode(m, adj, h0, first, 4, {}, 0.0, nullptr);
    Tensor h = h0[0], input = first;
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(copy_values(a[k]) == copy_values(b[k]));
      CHECK(copy_values(a[k]) == copy_values(none[k]));
      h = gcrn_step(m.decoder[0], adj, input, h);
      input = apply(m.readout, h);
      CHECK(copy_values(a[k]) == copy_values(input));
    }
  }
  SUBCASE("single step never samples") {
    const auto out = decode(m, adj, h0, first, 1, {}, 0.5, nullptr);
    REQUIRE(out.size() == 1);
    CHECK(copy_values(out[0]) == copy_values(apply(m.readout, gcrn_step(m.decoder[0], adj, first, h0[0]))));
  }
  SUBCASE("mixed sampling uses one draw per step") {
    std::mt19937_64 a(9), b(9);
    const auto out = decode(m, adj, h0, first, 4, teacher, 0.5, &a);
    std::uniform_real_distribution<double> coin(0, 1);
    Tensor h = h0[0], input = first;
    for (std::size_t k = 0; k < 4; ++k) {
      if (k > 0) input = coin(b) < 0.5 ? teacher[k - 1] : apply(m.readout, h);
      h = gcrn_step(m.decoder[0], adj, input, h);
      CHECK(copy_values(out[k]) == copy_values(apply(m.readout, h)));
    }
  }
  SUBCASE("contract errors") {
    CHECK_THROWS_AS(decode(m, adj, h0, first, 4, {}, 0.3, &rng), ContractError);
    CHECK_THROWS_AS(decode(m, adj, h0, first, 4, teacher, 0.3, nullptr), ContractError);
    CHECK_THROWS_AS(decode(m, adj, h0, first, 4, teacher, 1.5, nullptr), ContractError);
  }
}

TEST_CASE("forward examples") {
  std::mt19937_64 rng(4);
  const ModelConfig c = micro_config();
  const Seq2SeqModel a = Seq2SeqModel::init(c), b = Seq2SeqModel::init(c);
  const auto x = random_frames(4, 3, rng);
  const Tensor pa = forward(a, x), pb = forward(b, x);
  CHECK(pa.shape() == Shape{2, 3, 1});
  CHECK(copy_values(pa) == copy_values(pb));

  SUBCASE("batched rows equal separate samples") {
    const ForecastBatch windows = random_windows(5, c, rng);
    const std::vector<std::size_t> all{0, 1, 2, 3, 4};
    const Tensor batched = forward(a, gather_frames(windows, all).history);
    for (std::size_t i = 0; i < 5; ++i) {
      const std::size_t one[] = {i};
      const Tensor single = forward(a, gather_frames(windows, one).history);
      for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t s = 0; s < 3; ++s)
          CHECK(single.values()[k * 3 + s] == batched.values()[(k * 5 + i) * 3 + s]);
    }
  }
  SUBCASE("chunking and worker count do not change predictions") {
    const ForecastBatch windows = random_windows(23, c, rng);
    const auto ref = predict_windows(a, windows, 64, 1);
    CHECK(predict_windows(a, windows, 5, 1) == ref);
    CHECK(predict_windows(a, windows, 4, 3) == ref);
    CHECK(predict_windows(a, windows, 1, 8) == ref);
  }
  SUBCASE("raw-source attention") {
    ModelConfig r = c;
    r.attention_source = AttentionSource::kRaw;
    const Tensor out = forward(Seq2SeqModel::init(r), x);
    CHECK(out.shape() == Shape{2, 3, 1});
  }
}

TEST_CASE("attention-free reduction is exact") {
  std::mt19937_64 rng(5);
  for (std::size_t layers : {1, 2}) {
    ModelConfig c = micro_config();
    c.layers = layers;
    Seq2SeqModel full = Seq2SeqModel::init(c);
    c.use_attention = false;
    const Seq2SeqModel plain = Seq2SeqModel::init(c);

    for (const Tensor& p : full.attention.parameters()) fill(p, 0.0);
    for (const Affine& a : full.augment) {
      fill(a.weight, 0.0);
      fill(a.bias, 0.0);
      Tensor w = a.weight;
      for (std::size_t i = 0; i < 4; ++i) w.mutable_values()[i * 4 + i] = 1.0;
    }
    const auto x = random_frames(4, 6, rng);
    CHECK(copy_values(forward(full, x)) == copy_values(forward(plain, x)));
  }
}

TEST_CASE("parameter counting") {
  ModelConfig tiny;
  tiny.stations = 1;
  tiny.hidden_width = 1;
  tiny.heads = 1;
  tiny.embed_width = 1;
  CHECK(count_parameters(Seq2SeqModel::init(tiny)) == 29);

  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig c;
    c.stations = 1 + rng() % 6;
    c.heads = 1 + rng() % 3;
    c.hidden_width = c.heads * (1 + rng() % 4);
    c.layers = 1 + rng() % 3;
    c.embed_width = 1 + rng() % 5;
    c.use_attention = rng() % 4 != 0;
    c.attention_source = rng() % 2 ? AttentionSource::kEncoder : AttentionSource::kRaw;
    const Seq2SeqModel m = Seq2SeqModel::init(c);
    CHECK(count_parameters(m) == expected_count(c));

    std::size_t in_checkpoint = 0;
    for (const auto& t : snapshot(m, {}, 0, 0.0).tensors) in_checkpoint += t.values.size();
    CHECK(in_checkpoint == count_parameters(m));

    ModelConfig wide = c;
    wide.hidden_width *= 2;
    CHECK(count_parameters(Seq2SeqModel::init(wide)) > count_parameters(m));
  }
  ModelConfig paper_scale;
  paper_scale.stations = 186;
  CHECK(count_parameters(Seq2SeqModel::init(paper_scale)) == expected_count(paper_scale));
}

TEST_CASE("checkpoint round trip is bit-identical") {
  std::mt19937_64 rng(7);
  ModelConfig c = micro_config();
  c.sparsity_factor = 0.1 + 1.0 / 3.0;
  c.seed = 0xFFFF'FFFF'FFFF'FFF1ULL;
  Seq2SeqModel m = Seq2SeqModel::init(c);
  for (const Tensor& p : m.parameters()) {
    Tensor t = p;
    for (double& v : t.mutable_values()) v = std::uniform_real_distribution<double>(-1, 1)(rng) / 3.0;
  }
  const NormStats stats{{1.0 / 3.0, 2.5, -7e-300}, {0.1, 1e10, 3.0}};
  const Checkpoint ck = snapshot(m, stats, 42, 0.123456789012345678);

  std::stringstream buf;
  write_checkpoint(ck, buf);
  const std::string bytes = buf.str();
  CHECK(bytes.rfind("GLOWCKPT1\n", 0) == 0);
  const Checkpoint back = read_checkpoint(buf);
  CHECK(back.epoch == 42);
  CHECK(back.best_val_mae == ck.best_val_mae);
  CHECK(back.stats.mean == stats.mean);
  CHECK(back.stats.stddev == stats.stddev);
  CHECK(back.config.seed == c.seed);
  CHECK(back.config.sparsity_factor == c.sparsity_factor);

  const Seq2SeqModel again = restore(back);
  const auto x = random_frames(4, 9, rng);
  CHECK(copy_values(forward(again, x)) == copy_values(forward(m, x)));

  std::stringstream second;
  write_checkpoint(back, second);
  CHECK(second.str() == bytes);

  SUBCASE("corrupt input") {
    std::stringstream bad("GLOWCKPT0\nxxxxxxxx");
    CHECK_THROWS_AS(read_checkpoint(bad), IngestError);
    std::stringstream cut(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(read_checkpoint(cut), IngestError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), IngestError);
  }
  SUBCASE("layout mismatch") {
    Checkpoint wrong = ck;
    wrong.tensors.pop_back();
    CHECK_THROWS_AS(restore(wrong), ContractError);
  }
}

TEST_CASE("full model gradient matches finite differences") {
  std::mt19937_64 rng(8);
  for (AttentionSource source : {AttentionSource::kEncoder, AttentionSource::kRaw}) {
    ModelConfig c = micro_config();
    c.attention_source = source;
    const Seq2SeqModel m = Seq2SeqModel::init(c);
    // [I; 0] would leave the attention branch with zero gradient.
    for (const Affine& a : m.augment) {
      Tensor w = a.weight;
      const auto v = testing::uniform_values(w.numel(), rng, -0.7, 0.7);
      std::copy(v.begin(), v.end(), w.mutable_values().begin());
    }
    const auto x = random_frames(4, 6, rng);
    Tensor target;
    for (;;) {
      target = random_tensor({2, 6, 1}, rng, -2, 2);
      NoGradGuard guard;
      const Tensor residual = ops::sub(forward(m, x), target);
      bool near_kink = false;
      for (double r : residual.values()) near_kink = near_kink || std::fabs(r) < 1e-3;
      if (!near_kink) break;
    }
    auto params = m.parameters();
    const double err = finite_difference_check(
        [&] { return ops::mae_loss(forward(m, x), target); }, params);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("curriculum and learning-rate schedules") {
  double prev = 1.0;
  for (std::size_t step = 0; step < 2'000'000; step += 997) {
    const double p = teacher_forcing_probability(step, 2000.0);
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
    CHECK(p <= prev);
    prev = p;
  }
  CHECK(std::fabs(teacher_forcing_probability(0, 2000.0) - 2000.0 / 2001.0) < 1e-15);

  TrainConfig tc;
  CHECK(learning_rate_at(tc, 0) == 0.01);
  CHECK(learning_rate_at(tc, 49) == 0.01);
  CHECK(std::fabs(learning_rate_at(tc, 50) - 0.001) < 1e-18);
  CHECK(std::fabs(learning_rate_at(tc, 150) - 0.0001) < 1e-18);

  TrainConfig bad;
  bad.patience = bad.max_epochs;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.lr_decay = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("Adam and clipping") {
  Tensor w = Tensor::parameter({2}, {1.0, -2.0}, "w");
  Adam adam({w});
  w.grad_buffer()[0] = 0.5;
  w.grad_buffer()[1] = -4.0;
  adam.step(0.1);
  // After one step the bias-corrected moments are g and g^2.
  CHECK(std::fabs(w.values()[0] - (1.0 - 0.1 * 0.5 / (0.5 + 1e-8))) < 1e-15);
  CHECK(std::fabs(w.values()[1] - (-2.0 + 0.1 * 4.0 / (4.0 + 1e-8))) < 1e-15);

  Tensor a = Tensor::parameter({2}, {0, 0}), b = Tensor::parameter({1}, {0});
  a.grad_buffer()[0] = 3;
  a.grad_buffer()[1] = 0;
  b.grad_buffer()[0] = 4;
  const Tensor both[] = {a, b};
  CHECK(clip_gradients(both, 10.0) == 5.0);
  CHECK(a.grad()[0] == 3.0);
  CHECK(clip_gradients(both, 1.0) == 5.0);
  CHECK(std::fabs(a.grad()[0] - 0.6) < 1e-15);
  CHECK(std::fabs(b.grad()[0] - 0.8) < 1e-15);
}

TEST_CASE("training behaviour") {
  std::mt19937_64 rng(9);
  ModelConfig c = micro_config();
  const ForecastBatch train_set = random_windows(20, c, rng), val_set = random_windows(6, c, rng);
  const NormStats stats{{0, 0, 0}, {1, 1, 1}};

  SUBCASE("zero learning rate freezes the parameters") {
    Seq2SeqModel m = Seq2SeqModel::init(c);
    const Checkpoint before = snapshot(m, stats, 0, 0);
    TrainConfig tc;
    tc.base_lr = 0.0;
    tc.max_epochs = 2;
    tc.patience = 1;
    tc.batch_size = 8;
    train(m, train_set, val_set, tc, stats);
    const Checkpoint after = snapshot(m, stats, 0, 0);
    for (std::size_t i = 0; i < before.tensors.size(); ++i)
      CHECK(before.tensors[i].values == after.tensors[i].values);
  }
  SUBCASE("same seed, same loss curve and parameters") {
    TrainConfig tc;
    tc.max_epochs = 4;
    tc.patience = 3;
    tc.batch_size = 7;
    tc.curriculum_tau = 5.0;
    tc.seed = 3;
    Seq2SeqModel a = Seq2SeqModel::init(c), b = Seq2SeqModel::init(c);
    const TrainResult ra = train(a, train_set, val_set, tc, stats);
    const TrainResult rb = train(b, train_set, val_set, tc, stats);
    REQUIRE(ra.history.size() == rb.history.size());
    for (std::size_t i = 0; i < ra.history.size(); ++i) {
      CHECK(ra.history[i].train_loss == rb.history[i].train_loss);
      CHECK(ra.history[i].val_mae == rb.history[i].val_mae);
    }
    std::stringstream sa, sb;
    write_checkpoint(ra.best, sa);
    write_checkpoint(rb.best, sb);
    CHECK(sa.str() == sb.str());
    CHECK(copy_values(a.parameters()[3]) == copy_values(b.parameters()[3]));
  }
  SUBCASE("best checkpoint is the lowest validation epoch") {
    TrainConfig tc;
    tc.max_epochs = 6;
    tc.patience = 5;
    tc.batch_size = 5;
    Seq2SeqModel m = Seq2SeqModel::init(c);
    const TrainResult r = train(m, train_set, val_set, tc, stats);
    double best = INFINITY;
    std::size_t best_epoch = 0;
    for (const auto& e : r.history)
      if (e.val_mae < best) best = e.val_mae, best_epoch = e.epoch;
    CHECK(r.best.best_val_mae == best);
    CHECK(r.best.epoch == best_epoch);
    CHECK(evaluate_mae(m, val_set) == best);
  }
  SUBCASE("non-finite loss names the op") {
    Seq2SeqModel m = Seq2SeqModel::init(c);
    fill(m.readout.bias, NAN);
    TrainConfig tc;
    tc.max_epochs = 2;
    tc.patience = 1;
    try {
      train(m, train_set, val_set, tc, stats);
      FAIL("expected a NumericError");
    } catch (const NumericError& e) {
      const std::string what = e.what();
      CHECK(what.find("add_bias") != std::string::npos);
      CHECK(what.find("epoch 0") != std::string::npos);
    }
  }
}

TEST_CASE("a single synthetic window is memorized") {
  SynthOptions o;
  o.stations = 4;
  o.days = 400;
  o.seed = 11;
  const PreparedData data = split_normalize_window(gaussian_smooth(synth_generate(o).panel), {}, 12, 12);
  const std::size_t pick[] = {100};
  const ForecastBatch one = data.train.subset(pick);

  ModelConfig c;
  c.stations = 4;
  c.embed_width = 32;
  // Fixed seed: some draws let an adjacency row collapse to uniform early
  // (all relu logits at 0, so it never recovers) and then plateau above 1e-2.
  c.seed = 0;
  Seq2SeqModel m = Seq2SeqModel::init(c);
  TrainConfig tc;
  tc.max_epochs = 500;
  tc.patience = 499;
  tc.milestones = {400, 470};
  // The window doubles as validation set, so the kept checkpoint is the one
  // with the lowest free-running error on it.
  const TrainResult r = train(m, one, one, tc, data.stats);
  CHECK(r.history.size() <= 500);
  CHECK(evaluate_mae(m, one) < 1e-2);
}
