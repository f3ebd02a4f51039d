#include <doctest.h>

#include <cmath>
#include <functional>

#include "ssfl/rng.hpp"
#include "ssfl/tape.hpp"

using namespace ssfl;

namespace {

DenseArray randn(std::vector<std::size_t> shape, Rng& rng, double std = 1.0) {
  DenseArray a = DenseArray::zeros(std::move(shape));
  for (double& v : a.data) v = rng.gaussian(0.0, std);
  return a;
}

// Random positive weights so the scalarized output exercises every adjoint
// entry, not just the uniform sum direction.
NodeId scalarize(Tape& tape, NodeId out, Rng& rng) {
  DenseArray w = randn(tape.value(out).shape, rng, 1.0);
  return tape.sum_all(tape.mul(out, tape.constant(std::move(w))));
}

}  // namespace

TEST_CASE("affine identity weight and zero bias is the identity") {
  Tape tape;
  NodeId v = tape.input("v", DenseArray({1, 3}, {1.5, -2.0, 0.25}));
  DenseArray eye = DenseArray::zeros({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at2(i, i) = 1.0;
  NodeId out = tape.affine(v, tape.constant(eye), tape.constant(DenseArray::zeros({3})));
  CHECK(tape.value(out).data == std::vector<double>{1.5, -2.0, 0.25});
}

TEST_CASE("relu clamps negatives and zero") {
  Tape tape;
  NodeId x = tape.input("x", DenseArray({1, 3}, {-1.0, 0.0, 2.0}));
  NodeId out = tape.relu(x);
  CHECK(tape.value(out).data == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("cosine similarity of a vector with itself is 1") {
  Tape tape;
  NodeId v = tape.input("v", DenseArray({1, 4}, {0.3, -1.2, 2.0, 0.5}));
  NodeId out = tape.cosine_similarity(v, v);
  CHECK(tape.value(out).data[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("backpropagate: quadratic sum gives 2w") {
  Tape tape;
  NodeId w = tape.parameter("w", DenseArray({2}, {1.0, 2.0}));
  NodeId loss = tape.sum_all(tape.mul(w, w));
  tape.backpropagate(loss);
  CHECK(tape.adjoint(w).data[0] == doctest::Approx(2.0));
  CHECK(tape.adjoint(w).data[1] == doctest::Approx(4.0));
}

TEST_CASE("backpropagate: constant terminal leaves zero gradients") {
  Tape tape;
  NodeId w = tape.parameter("w", DenseArray({2}, {1.0, 2.0}));
  (void)w;
  NodeId c = tape.constant(DenseArray::scalar(3.0));
  NodeId loss = tape.sum_all(c);
  tape.backpropagate(loss);
  CHECK(tape.adjoint(w).data == std::vector<double>{0.0, 0.0});
}

TEST_CASE("backpropagate rejects non-scalar terminal") {
  Tape tape;
  NodeId w = tape.parameter("w", DenseArray({2}, {1.0, 2.0}));
  CHECK_THROWS_AS(tape.backpropagate(w), std::invalid_argument);
}

TEST_CASE("shape mismatch errors name the node and shapes") {
  Tape tape;
  NodeId x = tape.input("x", DenseArray({2, 3}, std::vector<double>(6, 1.0)));
  NodeId w = tape.constant(DenseArray({2, 2}, std::vector<double>(4, 1.0)));
  NodeId b = tape.constant(DenseArray::zeros({2}));
  CHECK_THROWS_WITH_AS(tape.affine(x, w, b),
                       doctest::Contains("shape mismatch in affine"), std::invalid_argument);
}

TEST_CASE("evaluate is pure: repeated calls are bit-identical") {
  Rng rng(7);
  Tape tape;
  NodeId x = tape.parameter("x", randn({3, 4}, rng));
  NodeId y = tape.l2_normalize(tape.exp_of(x));
  NodeId loss = tape.sum_all(y);
  std::vector<double> first = tape.evaluate(loss).data;
  std::vector<double> second = tape.evaluate(loss).data;
  CHECK(first == second);
}

TEST_CASE("softmax cross-entropy probabilities sum to one per row") {
  Rng rng(11);
  Tape tape;
  NodeId logits = tape.parameter("logits", randn({5, 7}, rng, 10.0));
  DenseArray targets = DenseArray::zeros({5, 7});
  for (std::size_t r = 0; r < 5; ++r) targets.at2(r, r % 7) = 1.0;
  NodeId loss = tape.softmax_xent(logits, targets, DenseArray::full({5}, 1.0), 5.0);
  const DenseArray& probs = tape.node(loss).probs;
  REQUIRE(probs.shape == std::vector<std::size_t>{5, 7});
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 7; ++c) total += probs.at2(r, c);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gradient check: linear model is exact to near machine precision") {
  Rng rng(3);
  Tape tape;
  NodeId w = tape.parameter("w", randn({4, 1}, rng));
  NodeId x = tape.input("x", randn({2, 4}, rng));
  NodeId out = tape.affine(x, w, tape.constant(DenseArray::zeros({1})));
  NodeId loss = tape.sum_all(out);
  GradCheckReport report = gradient_check(tape, loss, 1e-5, 1e-4);
  CHECK(report.all_pass);
  CHECK(report.max_rel_error < 1e-9);
}

TEST_CASE("gradient check flags relu kink at exactly zero and excludes it") {
  Tape tape;
  NodeId w = tape.parameter("w", DenseArray({3}, {0.0, 1.0, -1.0}));
  NodeId loss = tape.sum_all(tape.relu(w));
  GradCheckReport report = gradient_check(tape, loss, 1e-5, 1e-4);
  REQUIRE(report.entries.size() == 1);
  CHECK(report.entries[0].skipped_kinks == 1);
  CHECK(report.entries[0].checked == 2);
  CHECK(report.all_pass);
}

// Every operator's analytic adjoint against central finite differences on
// random inputs; kink crossings are excluded by the region signature.
namespace {

void check_op(const char* name, int trials,
              const std::function<NodeId(Tape&, Rng&)>& build) {
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(stream_seed(900 + trial, 0, 0, name));
    Tape tape;
    NodeId loss = build(tape, rng);
    GradCheckReport report = gradient_check(tape, loss, 1e-5, 1e-4);
    worst = std::max(worst, report.max_rel_error);
    if (!report.all_pass) {
      CAPTURE(name);
      CAPTURE(trial);
      CHECK(report.all_pass);
      return;
    }
  }
  CAPTURE(name);
  CHECK(worst <= 1e-4);
}

}  // namespace

TEST_CASE("operator adjoints match finite differences on random inputs") {
  const int n = 100;
  check_op("affine", n, [](Tape& t, Rng& rng) {
    NodeId x = t.parameter("x", randn({3, 4}, rng));
    NodeId w = t.parameter("w", randn({4, 5}, rng));
    NodeId b = t.parameter("b", randn({5}, rng));
    return scalarize(t, t.affine(x, w, b), rng);
  });
  check_op("conv1d", n, [](Tape& t, Rng& rng) {
    int stride = 1 + static_cast<int>(rng.uniform_int(0, 1));
    int padding = static_cast<int>(rng.uniform_int(0, 3));
    NodeId x = t.parameter("x", randn({2, 3, 12}, rng));
    NodeId w = t.parameter("w", randn({4, 3, 5}, rng));
    NodeId b = t.parameter("b", randn({4}, rng));
    return scalarize(t, t.conv1d(x, w, b, stride, padding), rng);
  });
  check_op("relu", n, [](Tape& t, Rng& rng) {
    NodeId x = t.parameter("x", randn({4, 6}, rng));
    return scalarize(t, t.relu(x), rng);
  });
  check_op("maxpool1d", n, [](Tape& t, Rng& rng) {
    NodeId x = t.parameter("x", randn({2, 3, 9}, rng));
    int window = 2 + static_cast<int>(rng.uniform_int(0, 1));
    return scalarize(t, t.maxpool1d(x, window), rng);
  });
  check_op("global_mean_pool", n, [](Tape& t, Rng& rng) {
    NodeId x = t.parameter("x", randn({2, 4, 7}, rng));
    return scalarize(t, t.global_mean_pool(x), rng);
  });
  check_op("softmax_xent", n, [](Tape& t, Rng& rng) {
    NodeId logits = t.parameter("logits", randn({4, 5}, rng, 2.0));
    DenseArray targets = DenseArray::zeros({4, 5});
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        targets.at2(r, c) = rng.uniform(0.05, 1.0);
        total += targets.at2(r, c);
      }
      for (std::size_t c = 0; c < 5; ++c) targets.at2(r, c) /= total;
    }
    DenseArray weights = DenseArray::zeros({4});
    for (double& v : weights.data) v = rng.uniform(0.1, 2.0);
    return t.softmax_xent(logits, targets, weights, rng.uniform(1.0, 8.0));
  });
  check_op("l2_normalize", n, [](Tape& t, Rng& rng) {
    DenseArray x = randn({3, 5}, rng);
    for (std::size_t r = 0; r < 3; ++r) x.at2(r, 0) += x.at2(r, 0) >= 0 ? 1.0 : -1.0;
    NodeId xn = t.parameter("x", std::move(x));
    return scalarize(t, t.l2_normalize(xn), rng);
  });
  check_op("cosine_similarity", n, [](Tape& t, Rng& rng) {
    DenseArray a = randn({3, 4}, rng);
    DenseArray b = randn({2, 4}, rng);
    for (std::size_t r = 0; r < 3; ++r) a.at2(r, 0) += a.at2(r, 0) >= 0 ? 1.0 : -1.0;
    for (std::size_t r = 0; r < 2; ++r) b.at2(r, 0) += b.at2(r, 0) >= 0 ? 1.0 : -1.0;
    NodeId an = t.parameter("a", std::move(a));
    NodeId bn = t.parameter("b", std::move(b));
    return scalarize(t, t.cosine_similarity(an, bn), rng);
  });
  check_op("add_mul_scale", n, [](Tape& t, Rng& rng) {
    NodeId a = t.parameter("a", randn({3, 3}, rng));
    NodeId b = t.parameter("b", randn({3, 3}, rng));
    NodeId out = t.scale(t.mul(t.add(a, b), b), rng.uniform(-2.0, 2.0));
    return scalarize(t, out, rng);
  });
  check_op("exp", n, [](Tape& t, Rng& rng) {
    NodeId a = t.parameter("a", randn({2, 5}, rng, 0.5));
    return scalarize(t, t.exp_of(a), rng);
  });
  check_op("log", n, [](Tape& t, Rng& rng) {
    DenseArray x = DenseArray::zeros({2, 5});
    for (double& v : x.data) v = rng.uniform(0.5, 3.0);
    NodeId a = t.parameter("a", std::move(x));
    return scalarize(t, t.log_of(a), rng);
  });
  check_op("reductions", n, [](Tape& t, Rng& rng) {
    NodeId a = t.parameter("a", randn({3, 4}, rng));
    NodeId partial = t.row_sum(a);            // (3)
    NodeId total = t.add(t.mean_all(a), t.sum_all(partial));
    return scalarize(t, total, rng);
  });
  check_op("concat_rows", n, [](Tape& t, Rng& rng) {
    NodeId a = t.parameter("a", randn({2, 3}, rng));
    NodeId b = t.parameter("b", randn({3, 3}, rng));
    return scalarize(t, t.concat_rows({a, b}), rng);
  });
}
