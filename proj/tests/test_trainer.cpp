#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gamic/errors.h"
#include "gamic/gradcheck.h"
#include "gamic/trainer.h"
#include "test_support.h"

using namespace gamic;

namespace {

std::vector<double> unit(std::vector<double> v) {
  const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  for (double& x : v) x /= n;
  return v;
}

std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.uniform(-1, 1);
  return unit(v);
}

Tensor2 stack(const std::vector<std::vector<double>>& rows, std::size_t d) {
  Tensor2 t(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < d; ++k) t(r, k) = rows[r][k];
  }
  return t;
}

EncoderConfig tiny_encoder(std::size_t out_dim) {
  EncoderConfig c;
  c.hidden_dim = 8;
  c.heads_layer1 = 2;
  c.out_dim = out_dim;
  c.seed = 4;
  return c;
}

}  // namespace

TEST_CASE("uniform logits give ln(K+1)") {
  const std::vector<double> z = {1.0, 0.0};
  const std::vector<double> y = unit({1.0, 1.0});
  for (std::size_t k : {1U, 7U}) {
    const std::vector<std::vector<double>> negs(k, y);
    const double loss = nce_loss({z}, {{y}}, {negs}, 0.1);
    CHECK(std::abs(loss - std::log(static_cast<double>(k + 1))) < 1e-12);
  }
  CHECK(std::abs(std::log(2.0) - 0.6931) < 1e-4);
  CHECK(std::abs(std::log(8.0) - 2.0794) < 1e-4);
}

TEST_CASE("separated logits drive the loss to zero") {
  const std::vector<double> z = {1.0, 0.0};
  const std::vector<double> pos = {1.0, 0.0};
  const std::vector<double> neg = {-1.0, 0.0};
  for (std::size_t k : {1U, 8U, 32U}) {
    const double loss = nce_loss({z}, {{pos}}, {std::vector<std::vector<double>>(k, neg)}, 0.1);
    CHECK(loss == doctest::Approx(std::log1p(static_cast<double>(k) * std::exp(-20.0))).epsilon(1e-9));
    CHECK(loss < 1e-6);
  }
}

TEST_CASE("temperature must be positive") {
  CHECK_THROWS_AS(nce_loss({{1.0}}, {{{1.0}}}, {{{1.0}}}, 0.0), ConfigError);
  CHECK_THROWS_AS(nce_loss({{1.0}}, {{{1.0}}}, {{{1.0}}}, -1.0), ConfigError);
  TrainConfig c;
  c.temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("multiple positives average their terms") {
  Rng rng(3);
  const auto z = random_unit(rng, 4);
  const auto p1 = random_unit(rng, 4), p2 = random_unit(rng, 4);
  std::vector<std::vector<double>> negs;
  for (int i = 0; i < 3; ++i) negs.push_back(random_unit(rng, 4));
  const double both = nce_loss({z}, {{p1, p2}}, {negs}, 0.5);
  const double a = nce_loss({z}, {{p1}}, {negs}, 0.5);
  const double b = nce_loss({z}, {{p2}}, {negs}, 0.5);
  CHECK(both == doctest::Approx((a + b) / 2).epsilon(1e-12));
  // Batch mean.
  CHECK(nce_loss({z, z}, {{p1}, {p2}}, {negs, negs}, 0.5) == doctest::Approx((a + b) / 2).epsilon(1e-12));
}

TEST_CASE("loss is non-negative and the tape version agrees") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 6, p = 1 + rng.uniform_index(3), k = rng.uniform_index(6);
    const double tau = rng.uniform(0.05, 2.0);
    const auto z = random_unit(rng, d);
    std::vector<std::vector<double>> pos, neg;
    for (std::size_t i = 0; i < p; ++i) pos.push_back(random_unit(rng, d));
    for (std::size_t i = 0; i < k; ++i) neg.push_back(random_unit(rng, d));
    const double plain = nce_loss({z}, {pos}, {neg}, tau);
    CHECK(plain >= 0.0);
    ad::Tape tape;
    const auto var = nce_loss_var(tape.constant(stack({z}, d)), stack(pos, d), stack(neg, d), tau);
    CHECK(var.value().data[0] == doctest::Approx(plain).epsilon(1e-12));
  }
}

TEST_CASE("argmax over positive and negatives is invariant to temperature") {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto z = random_unit(rng, 5);
    std::vector<double> logits;
    for (int i = 0; i < 6; ++i) {
      const auto y = random_unit(rng, 5);
      logits.push_back(std::inner_product(z.begin(), z.end(), y.begin(), 0.0));
    }
    auto argmax_at = [&](double tau) {
      ad::Tape tape;
      const auto probs = ad::exp(ad::log_softmax_rows(ad::scale(tape.constant(Tensor2(1, 6, logits)), 1.0 / tau)));
      const auto& v = probs.value().data;
      return std::max_element(v.begin(), v.end()) - v.begin();
    };
    const auto ref = std::max_element(logits.begin(), logits.end()) - logits.begin();
    for (double tau : {0.01, 0.1, 1.0, 10.0}) CHECK(argmax_at(tau) == ref);
  }
}

TEST_CASE("encoder plus NCE gradients match finite differences") {
  const auto g = parse_smiles("CC(=O)OC");  // 5 atoms
  REQUIRE(g.num_atoms() == 5);
  auto enc = tiny_encoder(4);
  enc.hidden_dim = 4;
  auto params = init_encoder_params(enc);
  const auto in = prepare_inputs(g);
  Rng rng(21);
  std::vector<std::vector<double>> pos{random_unit(rng, 4)}, neg;
  for (int i = 0; i < 3; ++i) neg.push_back(random_unit(rng, 4));
  const auto report = finite_diff_check(params, [&](ad::Tape& t, ParamStore& s) {
    const Weights w(t, s);
    return nce_loss_var(encode_var(w, enc, in), stack(pos, 4), stack(neg, 4), 0.1);
  });
  for (const auto& e : report.tensors) {
    CAPTURE(e.name);
    CAPTURE(e.max_rel_error);
    CHECK(e.pass);
  }
}

TEST_CASE("two-molecule toy problem separates") {
  TextEmbeddingIndex captions(4, "toy");
  captions.add("a", {1, 0, 0, 0});
  captions.add("b", {0, 1, 0, 0});
  const std::vector<TrainExample> set = {{"a", parse_smiles("CCO")}, {"b", parse_smiles("c1ccccc1")}};
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.lr = 1e-2;
  cfg.sampler.positives = 1;
  cfg.sampler.negatives = 1;
  cfg.seed = 1;
  const auto res = train(set, set, captions, tiny_encoder(4), cfg);
  REQUIRE(res.curve.size() == 100);
  CHECK(res.curve.back().train_loss < 0.1);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto z = encode(set[i].graph, res.params, res.encoder);
    const auto& own = captions.at(set[i].id);
    const auto& other = captions.at(set[1 - i].id);
    CHECK(std::inner_product(z.begin(), z.end(), own.begin(), 0.0) >
          std::inner_product(z.begin(), z.end(), other.begin(), 0.0));
  }
}

TEST_CASE("training is deterministic and keeps the best validation epoch") {
  Rng gen(2);
  TextEmbeddingIndex captions(6);
  std::vector<TrainExample> set;
  for (int i = 0; i < 16; ++i) {
    const std::string id = "m" + std::to_string(i);
    set.push_back({id, parse_smiles(testing::random_smiles(gen, 3, 8))});
    const auto v = random_unit(gen, 6);
    captions.add(id, std::vector<float>(v.begin(), v.end()));
  }
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 5;
  cfg.lr = 5e-3;
  cfg.sampler.negatives = 4;
  cfg.seed = 17;
  const std::vector<TrainExample> train_set(set.begin(), set.begin() + 12), valid(set.begin() + 12, set.end());
  std::vector<EpochStats> seen;
  const auto a = train(train_set, valid, captions, tiny_encoder(6), cfg, [&](const EpochStats& s) { seen.push_back(s); });
  const auto b = train(train_set, valid, captions, tiny_encoder(6), cfg);
  CHECK(seen.size() == 6);
  CHECK(loss_curve_csv(a.curve, "val_separation") == loss_curve_csv(b.curve, "val_separation"));
  CHECK(a.params == b.params);
  double best = -1e9;
  std::size_t best_epoch = 0;
  for (const auto& e : a.curve) {
    if (e.validation > best) {
      best = e.validation;
      best_epoch = e.epoch;
    }
  }
  CHECK(a.best_epoch == best_epoch);
  CHECK(validation_separation(valid, a.params, a.encoder, captions) == doctest::Approx(best).epsilon(1e-12));

  cfg.sampler.morgan_sampling = false;
  const auto c = train(train_set, valid, captions, tiny_encoder(6), cfg);
  CHECK(c.curve.size() == 6);
}

TEST_CASE("missing caption ids are listed") {
  TextEmbeddingIndex captions(4);
  captions.add("a", {1, 0, 0, 0});
  const std::vector<TrainExample> set = {{"a", parse_smiles("CC")}, {"ghost-1", parse_smiles("CO")}};
  const std::vector<TrainExample> valid = {{"ghost-2", parse_smiles("CN")}};
  try {
    train(set, valid, captions, tiny_encoder(4), TrainConfig{});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("ghost-1") != std::string::npos);
    CHECK(msg.find("ghost-2") != std::string::npos);
  }
  CHECK_THROWS_AS(train(set, {}, captions, tiny_encoder(5), TrainConfig{}), ConfigError);
}

TEST_CASE("GAE baseline training lowers the reconstruction loss") {
  Rng gen(4);
  std::vector<TrainExample> set;
  for (int i = 0; i < 8; ++i) set.push_back({"g" + std::to_string(i), parse_smiles(testing::random_smiles(gen, 3, 8))});
  auto enc = tiny_encoder(4);
  enc.gae_dim = 6;
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.lr = 1e-2;
  cfg.batch_size = 4;
  const auto res = train_gae(set, {}, enc, cfg);
  CHECK(res.curve.back().train_loss < res.curve.front().train_loss);
  CHECK_THROWS_AS(train_gae(set, {}, tiny_encoder(4), cfg), ConfigError);
  const auto z = encode_pooled(set[0].graph, res.params, res.encoder);
  CHECK(std::sqrt(std::inner_product(z.begin(), z.end(), z.begin(), 0.0)) == doctest::Approx(1.0));
}

TEST_CASE("loss curve csv") {
  const std::vector<EpochStats> curve = {{1, 0.5, 0.25}, {2, 0.125, 0.5}};
  CHECK(loss_curve_csv(curve, "val_separation") == "epoch,train_loss,val_separation\n1,0.5,0.25\n2,0.125,0.5\n");
}
