#include <doctest.h>

#include <cmath>

#include "ssfl/federation.hpp"
#include "ssfl/prototypes.hpp"
#include "ssfl/rng.hpp"

using namespace ssfl;

TEST_CASE("bank add keeps a running mean per class") {
  PrototypeBank bank;
  bank.add(2, {1.0, 3.0});
  CHECK(bank.classes.at(2).vec == std::vector<double>{1.0, 3.0});
  bank.add(2, {3.0, 5.0});
  CHECK(bank.classes.at(2).vec == std::vector<double>{2.0, 4.0});
  CHECK(bank.classes.at(2).count == 2);
}

TEST_CASE("opposite embeddings average to the zero vector") {
  PrototypeBank bank;
  bank.add(0, {1.0, -2.0, 0.5});
  bank.add(0, {-1.0, 2.0, -0.5});
  double norm = 0.0;
  for (double v : bank.classes.at(0).vec) norm += v * v;
  CHECK(std::sqrt(norm) < 1e-12);
}

TEST_CASE("aggregate: single client passes through") {
  PrototypeBank b;
  b.add(0, {1.0, 2.0});
  b.add(1, {0.0, -1.0});
  PrototypeBank g = aggregate_prototypes({b});
  CHECK(g.classes.at(0).vec == b.classes.at(0).vec);
  CHECK(g.classes.at(1).vec == b.classes.at(1).vec);
}

TEST_CASE("aggregate: counts 3 and 1 weight 0.75 / 0.25") {
  PrototypeBank a, b;
  a.classes[0] = {{4.0, 0.0}, 3};
  b.classes[0] = {{0.0, 4.0}, 1};
  PrototypeBank g = aggregate_prototypes({a, b});
  CHECK(g.classes.at(0).vec[0] == doctest::Approx(3.0));
  CHECK(g.classes.at(0).vec[1] == doctest::Approx(1.0));
  CHECK(g.classes.at(0).count == 4);
}

TEST_CASE("aggregate of identical prototypes is the identity (weights sum to 1)") {
  std::vector<PrototypeBank> banks(3);
  for (std::size_t k = 0; k < 3; ++k) banks[k].classes[1] = {{0.5, -0.25, 2.0}, k + 1};
  PrototypeBank g = aggregate_prototypes(banks);
  CHECK(g.classes.at(1).vec[0] == doctest::Approx(0.5));
  CHECK(g.classes.at(1).vec[1] == doctest::Approx(-0.25));
  CHECK(g.classes.at(1).vec[2] == doctest::Approx(2.0));
}

TEST_CASE("contributor-count mean shrinks the aggregate") {
  std::vector<PrototypeBank> banks(2);
  banks[0].classes[0] = {{2.0}, 1};
  banks[1].classes[0] = {{2.0}, 1};
  PrototypeBank plain = aggregate_prototypes(banks, false);
  PrototypeBank shrunk = aggregate_prototypes(banks, true);
  CHECK(plain.classes.at(0).vec[0] == doctest::Approx(2.0));
  CHECK(shrunk.classes.at(0).vec[0] == doctest::Approx(1.0));
}

TEST_CASE("momentum update identities and class union") {
  PrototypeBank prev, fresh;
  prev.classes[0] = {{2.0, 2.0}, 5};
  prev.classes[1] = {{1.0, 0.0}, 2};  // only in prev: carried forward
  fresh.classes[0] = {{4.0, 0.0}, 3};
  fresh.classes[2] = {{9.0, 9.0}, 1};  // only in fresh: enters at full value

  PrototypeBank half = momentum_update(prev, fresh, 0.5);
  CHECK(half.classes.at(0).vec[0] == doctest::Approx(3.0));
  CHECK(half.classes.at(0).vec[1] == doctest::Approx(1.0));
  CHECK(half.classes.at(1).vec == prev.classes.at(1).vec);
  CHECK(half.classes.at(2).vec == fresh.classes.at(2).vec);

  CHECK(momentum_update(prev, fresh, 0.0).classes.at(0).vec == fresh.classes.at(0).vec);
  CHECK(momentum_update(prev, fresh, 1.0).classes.at(0).vec == prev.classes.at(0).vec);
  CHECK_THROWS_AS(momentum_update(prev, fresh, 1.5), std::invalid_argument);
}

TEST_CASE("momentum update is exactly affine elementwise") {
  Rng rng(3);
  PrototypeBank prev, fresh;
  for (int cls = 0; cls < 4; ++cls) {
    PrototypeBank::Entry a, b;
    for (int j = 0; j < 6; ++j) {
      a.vec.push_back(rng.gaussian(0.0, 2.0));
      b.vec.push_back(rng.gaussian(0.0, 2.0));
    }
    a.count = 3;
    b.count = 4;
    prev.classes[cls] = a;
    fresh.classes[cls] = b;
  }
  double kappa = 0.9;
  PrototypeBank out = momentum_update(prev, fresh, kappa);
  for (int cls = 0; cls < 4; ++cls)
    for (int j = 0; j < 6; ++j) {
      double expect = kappa * prev.classes.at(cls).vec[j] +
                      (1.0 - kappa) * fresh.classes.at(cls).vec[j];
      CHECK(out.classes.at(cls).vec[j] == expect);
    }
}

TEST_CASE("uplink wire format round-trips and stays within C*(d+2) numbers") {
  Rng rng(5);
  PrototypeBank bank;
  std::size_t d = 16;
  int c = 4;
  for (int cls = 0; cls < c; ++cls) {
    PrototypeBank::Entry e;
    e.count = static_cast<std::size_t>(rng.uniform_int(1, 40));
    for (std::size_t j = 0; j < d; ++j) e.vec.push_back(rng.gaussian(0.0, 1.0));
    bank.classes[cls] = e;
  }
  auto bytes = encode_uplink(bank);
  CHECK(bytes.size() <= static_cast<std::size_t>(c) * (d + 2) * 8 + 16);
  PrototypeBank back = decode_uplink(bytes);
  REQUIRE(back.classes.size() == bank.classes.size());
  for (const auto& [cls, e] : bank.classes) {
    CHECK(back.classes.at(cls).vec == e.vec);
    CHECK(back.classes.at(cls).count == e.count);
  }
}

TEST_CASE("bank snapshot entries round-trip through the named-array container") {
  PrototypeBank bank;
  bank.add(3, {1.0, 2.0, 3.0});
  bank.add(3, {2.0, 3.0, 4.0});
  bank.add(7, {-1.0, 0.0, 1.0});
  PrototypeBank back = PrototypeBank::from_entries(bank.to_entries());
  CHECK(back.classes.at(3).vec == bank.classes.at(3).vec);
  CHECK(back.classes.at(3).count == 2);
  CHECK(back.classes.at(7).count == 1);
}

TEST_CASE("local prototypes match a brute-force per-class mean") {
  // tiny model, labeled-only client: expected prototype is the plain mean of
  // the eval embeddings per class
  ModelConfig mc;
  mc.window_length = 16;
  mc.conv_channels = {3};
  mc.kernel = 3;
  mc.padding = 1;
  mc.pool = 2;
  mc.proj_hidden = 5;
  mc.embed_dim = 4;
  mc.classes = 2;

  Rng rng(9);
  std::vector<SignalSample> data;
  for (int i = 0; i < 5; ++i) {
    DenseArray w = DenseArray::zeros({1, 16});
    for (double& v : w.data) v = rng.gaussian(0.0, 1.0);
    data.push_back({w, i % 2});
  }

  ClientState client;
  client.id = 0;
  client.params = ModelParams::init(mc, 4);
  client.split.labeled = {0, 1, 2, 3, 4};

  FederationConfig cfg;
  cfg.model = mc;
  PrototypeBank bank = compute_local_prototypes(client, data, cfg, 1, 1);

  std::vector<std::vector<double>> sums(2, std::vector<double>(mc.embed_dim, 0.0));
  std::vector<std::size_t> counts(2, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    DenseArray batch = DenseArray::zeros({1, 1, 16});
    batch.data = data[i].window.data;
    EvalOut out = eval_forward(mc, client.params, batch);
    int cls = *data[i].label;
    for (std::size_t j = 0; j < mc.embed_dim; ++j)
      sums[static_cast<std::size_t>(cls)][j] += out.embeddings.data[j];
    counts[static_cast<std::size_t>(cls)]++;
  }
  for (int cls = 0; cls < 2; ++cls) {
    REQUIRE(bank.classes.count(cls) == 1);
    CHECK(bank.classes.at(cls).count == counts[static_cast<std::size_t>(cls)]);
    for (std::size_t j = 0; j < mc.embed_dim; ++j) {
      double expect =
          sums[static_cast<std::size_t>(cls)][j] / static_cast<double>(counts[static_cast<std::size_t>(cls)]);
      CHECK(bank.classes.at(cls).vec[j] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("single labeled sample: prototype equals its embedding") {
  ModelConfig mc;
  mc.window_length = 8;
  mc.conv_channels = {2};
  mc.kernel = 3;
  mc.padding = 1;
  mc.pool = 2;
  mc.proj_hidden = 4;
  mc.embed_dim = 3;
  mc.classes = 2;
  Rng rng(10);
  DenseArray w = DenseArray::zeros({1, 8});
  for (double& v : w.data) v = rng.gaussian(0.0, 1.0);
  std::vector<SignalSample> data = {{w, 1}};
  ClientState client;
  client.params = ModelParams::init(mc, 4);
  client.split.labeled = {0};
  FederationConfig cfg;
  cfg.model = mc;
  PrototypeBank bank = compute_local_prototypes(client, data, cfg, 1, 1);
  DenseArray batch = DenseArray::zeros({1, 1, 8});
  batch.data = w.data;
  EvalOut out = eval_forward(mc, client.params, batch);
  REQUIRE(bank.classes.count(1) == 1);
  CHECK(bank.classes.at(1).vec == out.embeddings.data);
}
