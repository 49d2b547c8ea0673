#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "wmfrec/cf.hpp"
#include "wmfrec/error.hpp"
#include "wmfrec/model_io.hpp"
#include "wmfrec/random.hpp"

namespace wmfrec {
namespace {

struct Instance {
  std::vector<WeightedEntry> entries;
  oracle::DenseProblem dense;
  double base = 0.0;

  ConfidenceMatrix data() const {
    return ConfidenceMatrix(dense.preference.rows(), dense.preference.cols(), entries, base, dense.active);
  }
};

// Random sparse problem; roughly one item in five is inactive when
// `with_inactive` is set.
Instance make_instance(Rng& rng, Index users, Index items, double base, double density,
                       bool with_inactive = false) {
  Instance inst;
  inst.base = base;
  inst.dense.preference = Matrix::Zero(users, items);
  inst.dense.confidence = Matrix::Constant(users, items, base);
  inst.dense.active.assign(static_cast<std::size_t>(items), true);
  if (with_inactive) {
    for (Index i = 0; i < items; ++i) inst.dense.active[static_cast<std::size_t>(i)] = rng.uniform() > 0.2;
    inst.dense.active[0] = true;
  }
  for (Index u = 0; u < users; ++u) {
    for (Index i = 0; i < items; ++i) {
      if (!inst.dense.active[static_cast<std::size_t>(i)] || rng.uniform() >= density) continue;
      const double pref = rng.uniform() < 0.7 ? 1.0 : 0.0;
      const double conf = confidence(static_cast<double>(1 + rng.below(20)), 2.0, 1e-6, base);
      inst.entries.push_back({u, i, pref, conf});
      inst.dense.preference(u, i) = pref;
      inst.dense.confidence(u, i) = conf;
    }
  }
  return inst;
}

FactorModel random_model(Rng& rng, Index k, Index users, Index items, Index l, double lw, double lh) {
  FactorModel m;
  m.user_factors = oracle::random_matrix(rng, k, users);
  m.item_factors = oracle::random_matrix(rng, k, items);
  if (l > 0) m.content_map = oracle::random_matrix(rng, k, l);
  m.hyperparams.rank = k;
  m.hyperparams.lambda_w = lw;
  m.hyperparams.lambda_h = lh;
  return m;
}

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kParse;
}

TEST(Confidence, Examples) {
  EXPECT_EQ(confidence(0.0, 2.0, 1e-6, 0.0), 0.0);
  EXPECT_NEAR(confidence(1.0, 2.0, 1e-6, 0.0), 27.631023115927547, 1e-12);
  EXPECT_GT(confidence(10.0, 2.0, 1e-6), confidence(1.0, 2.0, 1e-6));
  EXPECT_NEAR(confidence(1.0, 2.0, 1e-6, 1.0), 28.631023115927547, 1e-12);
}

TEST(Hyperparams, Validation) {
  Hyperparams ok;
  EXPECT_NO_THROW(ok.validate());
  EXPECT_EQ(ok.rank, 50);
  EXPECT_EQ(ok.n_iters, 20);
  EXPECT_EQ(ok.alpha, 2.0);
  EXPECT_EQ(ok.epsilon, 1e-6);
  auto bad = [](auto mutate) {
    Hyperparams p;
    mutate(p);
    return kind_of([&] { p.validate(); });
  };
  EXPECT_EQ(bad([](Hyperparams& p) { p.rank = 0; }), ErrorKind::kConfig);
  EXPECT_EQ(bad([](Hyperparams& p) { p.alpha = 0; }), ErrorKind::kConfig);
  EXPECT_EQ(bad([](Hyperparams& p) { p.epsilon = -1; }), ErrorKind::kConfig);
  EXPECT_EQ(bad([](Hyperparams& p) { p.lambda_b = -1e-3; }), ErrorKind::kConfig);
  EXPECT_EQ(bad([](Hyperparams& p) { p.n_iters = -1; }), ErrorKind::kConfig);
}

TEST(ConfidenceMatrix, RejectsBadEntries) {
  const std::vector<WeightedEntry> dup = {{0, 0, 1, 1}, {0, 0, 1, 2}};
  EXPECT_EQ(kind_of([&] { ConfidenceMatrix(1, 1, dup, 0.0); }), ErrorKind::kData);
  const std::vector<WeightedEntry> oob = {{0, 3, 1, 1}};
  EXPECT_EQ(kind_of([&] { ConfidenceMatrix(1, 2, oob, 0.0); }), ErrorKind::kIndex);
  const std::vector<WeightedEntry> inactive = {{0, 1, 1, 1}};
  EXPECT_EQ(kind_of([&] { ConfidenceMatrix(1, 2, inactive, 0.0, {true, false}); }), ErrorKind::kData);
}

TEST(Objective, AllZeroAndPerfectFit) {
  FactorModel zero;
  zero.user_factors = Matrix::Zero(2, 3);
  zero.item_factors = Matrix::Zero(2, 4);
  zero.content_map = Matrix::Zero(2, 1);
  const ConfidenceMatrix empty(3, 4, {}, 0.0);
  EXPECT_EQ(objective(zero, empty, Matrix::Ones(1, 4)), 0.0);

  FactorModel fit;
  fit.user_factors = Matrix::Ones(1, 1);
  fit.item_factors = Matrix::Ones(1, 1);
  fit.hyperparams.lambda_w = 0.0;
  fit.hyperparams.lambda_h = 0.0;
  const std::vector<WeightedEntry> one = {{0, 0, 1.0, 2.0}};
  EXPECT_EQ(objective(fit, ConfidenceMatrix(1, 1, one, 0.0)), 0.0);
}

TEST(Objective, MatchesTermByTermOracle) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const double base = t % 2 == 0 ? 0.0 : 1.0;
    const Instance inst = make_instance(rng, 3, 4, base, 0.5, t % 3 == 0);
    const FactorModel m = random_model(rng, 2, 3, 4, 2, 0.3, 0.7);
    const Matrix z = oracle::random_matrix(rng, 2, 4);
    const auto data = inst.data();
    EXPECT_NEAR(objective(m, data),
                oracle::objective(inst.dense, m.user_factors, m.item_factors, Matrix(), Matrix(), 0.3, 0.7),
                1e-10);
    EXPECT_NEAR(objective(m, data, z),
                oracle::objective(inst.dense, m.user_factors, m.item_factors, *m.content_map, z, 0.3, 0.7),
                1e-10);
  }
}

TEST(Objective, DimensionMismatch) {
  Rng rng(2);
  const FactorModel m = random_model(rng, 2, 3, 4, 2, 1, 1);
  EXPECT_EQ(kind_of([&] { objective(m, ConfidenceMatrix(3, 5, {}, 0.0)); }), ErrorKind::kShape);
  EXPECT_EQ(kind_of([&] { objective(m, ConfidenceMatrix(3, 4, {}, 0.0), Matrix::Zero(3, 4)); }),
            ErrorKind::kShape);
}

TEST(UpdateUser, Examples) {
  const std::vector<WeightedEntry> one = {{0, 0, 1.0, 2.0}};
  const ConfidenceMatrix data(1, 1, one, 0.0);
  const Vector w = update_user(0, Matrix::Ones(1, 1), data, 1.0);
  EXPECT_NEAR(w(0), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(max_abs(update_user(0, Matrix::Zero(3, 1), data, 1.0)), 0.0);
  EXPECT_EQ(kind_of([&] { update_user(0, Matrix::Zero(3, 1), data, 0.0); }), ErrorKind::kSolver);
  EXPECT_EQ(kind_of([&] { update_user(1, Matrix::Zero(3, 1), data, 1.0); }), ErrorKind::kIndex);
}

TEST(UpdateUser, MatchesDenseOracle) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const double base = t % 2 == 0 ? 0.0 : 1.0;
    const Instance inst = make_instance(rng, 4, 5, base, 0.6, t % 3 == 0);
    const Matrix h = oracle::random_matrix(rng, 2, 5);
    const auto data = inst.data();
    for (int u = 0; u < 4; ++u) {
      const Vector got = update_user(u, h, data, 0.4);
      EXPECT_LT(max_abs(got - oracle::user_update(inst.dense, u, h, 0.4)), 1e-10);
    }
  }
}

TEST(UpdateItem, Examples) {
  Rng rng(4);
  const Instance inst = make_instance(rng, 3, 2, 1.0, 0.8);
  const auto data = inst.data();
  const Matrix b = oracle::random_matrix(rng, 2, 3);
  const Vector z = oracle::random_matrix(rng, 3, 1).col(0);
  EXPECT_LT(max_abs(update_item(1, Matrix::Zero(2, 3), data, 0.5, b, z) - b * z), 1e-15);
  EXPECT_EQ(max_abs(update_item(1, Matrix::Zero(2, 3), data, 0.5)), 0.0);
  EXPECT_EQ(kind_of([&] { update_item(0, Matrix::Zero(2, 3), data, 0.5, b, Vector::Zero(2)); }),
            ErrorKind::kShape);
}

TEST(UpdateItem, MatchesDenseOracle) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const double base = t % 2 == 0 ? 0.0 : 1.0;
    const Instance inst = make_instance(rng, 6, 4, base, 0.5);
    const Matrix w = oracle::random_matrix(rng, 3, 6);
    const Matrix b = oracle::random_matrix(rng, 3, 2);
    const Matrix z = oracle::random_matrix(rng, 2, 4);
    const auto data = inst.data();
    for (int i = 0; i < 4; ++i) {
      const Vector content = z.col(i);
      EXPECT_LT(max_abs(update_item(i, w, data, 0.8, b, content) -
                        oracle::item_update(inst.dense, i, w, 0.8, b * content)),
                1e-10);
      EXPECT_LT(max_abs(update_item(i, w, data, 0.8) -
                        oracle::item_update(inst.dense, i, w, 0.8, Vector::Zero(3))),
                1e-10);
    }
  }
}

TEST(UpdateContentMap, Examples) {
  Rng rng(6);
  const Matrix z = oracle::random_matrix(rng, 3, 10);
  EXPECT_LT(max_abs(update_content_map(z, z, 0.0) - Matrix::Identity(3, 3)), 1e-12);
  EXPECT_EQ(max_abs(update_content_map(oracle::random_matrix(rng, 2, 10), Matrix::Zero(3, 10), 1e-2)), 0.0);
  EXPECT_EQ(kind_of([&] { update_content_map(Matrix::Ones(2, 10), Matrix::Zero(3, 10), 0.0); }),
            ErrorKind::kSolver);
}

TEST(UpdateContentMap, MatchesRowwiseRidgeOracle) {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    const Matrix h = oracle::random_matrix(rng, 3, 10);
    const Matrix z = oracle::random_matrix(rng, 2, 10);
    const double lambda = t % 2 == 0 ? 0.0 : 0.3;
    EXPECT_LT(max_abs(update_content_map(h, z, lambda) - oracle::content_map(h, z, lambda)), 1e-10);
  }
}

TEST(Train, ZeroIterationsReturnsInitialization) {
  Rng rng(8);
  const Instance inst = make_instance(rng, 5, 6, 1.0, 0.4, true);
  Hyperparams p;
  p.rank = 3;
  p.n_iters = 0;
  const auto r = train(inst.data(), oracle::random_matrix(rng, 2, 6), p, 42);
  EXPECT_TRUE(r.objective_trace.empty());
  Rng expect(42);
  EXPECT_EQ(r.model.user_factors(0, 0), 0.01 * expect.normal());
  EXPECT_EQ(r.model.user_factors(1, 0), 0.01 * expect.normal());
  EXPECT_EQ(max_abs(*r.model.content_map), 0.0);
  for (Index i = 0; i < 6; ++i) {
    if (!inst.dense.active[static_cast<std::size_t>(i)]) EXPECT_EQ(max_abs(r.model.item_factors.col(i)), 0.0);
  }
  EXPECT_LT(max_abs(r.model.user_factors), 0.1);
}

TEST(Train, DeterministicForSeed) {
  Rng rng(9);
  const Instance inst = make_instance(rng, 20, 25, 1.0, 0.2);
  const Matrix z = oracle::random_matrix(rng, 3, 25);
  Hyperparams p;
  p.rank = 4;
  p.n_iters = 5;
  const auto a = train(inst.data(), z, p, 7);
  const auto b = train(inst.data(), z, p, 7);
  EXPECT_EQ(a.model.user_factors, b.model.user_factors);
  EXPECT_EQ(a.model.item_factors, b.model.item_factors);
  EXPECT_EQ(*a.model.content_map, *b.model.content_map);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
  const auto c = train(inst.data(), z, p, 8);
  EXPECT_NE(a.model.user_factors, c.model.user_factors);
}

void expect_non_increasing(const std::vector<double>& trace) {
  for (std::size_t k = 1; k < trace.size(); ++k) {
    EXPECT_LE(trace[k], trace[k - 1] * (1.0 + 1e-9)) << "sweep " << k + 1;
  }
}

TEST(Train, ObjectiveNonIncreasingBothVariants) {
  for (double base : {0.0, 1.0}) {
    Rng rng(10);
    const Instance inst = make_instance(rng, 50, 60, base, 0.15, true);
    const Matrix z = oracle::random_matrix(rng, 3, 60);
    Hyperparams p;
    p.rank = 5;
    p.n_iters = 20;
    p.base_confidence = base;
    p.lambda_w = 0.5;
    p.lambda_h = 2.0;
    const auto free = train(inst.data(), p, 3);
    const auto aware = train(inst.data(), z, p, 3);
    ASSERT_EQ(free.objective_trace.size(), 20u);
    ASSERT_EQ(aware.objective_trace.size(), 20u);
    expect_non_increasing(free.objective_trace);
    expect_non_increasing(aware.objective_trace);
  }
}

TEST(Train, BlockUpdatesAreIdempotent) {
  Rng rng(11);
  const Instance inst = make_instance(rng, 12, 15, 1.0, 0.3);
  const Matrix z = oracle::random_matrix(rng, 2, 15);
  Hyperparams p;
  p.rank = 3;
  p.n_iters = 4;
  const auto r = train(inst.data(), z, p, 1);
  const auto data = inst.data();
  const FactorModel& m = r.model;
  // The last block solved was B; re-solving it leaves it in place.
  EXPECT_LT(max_abs(update_content_map(m.item_factors, z, p.lambda_b) - *m.content_map), 1e-12);
  Matrix w = m.user_factors;
  for (Index u = 0; u < 12; ++u) w.col(u) = update_user(u, m.item_factors, data, p.lambda_w);
  Matrix again = w;
  for (Index u = 0; u < 12; ++u) again.col(u) = update_user(u, m.item_factors, data, p.lambda_w);
  EXPECT_LT(max_abs(again - w), 1e-12);
  Matrix h = m.item_factors;
  for (Index i = 0; i < 15; ++i) h.col(i) = update_item(i, w, data, p.lambda_h, *m.content_map, z.col(i));
  Matrix h_again = h;
  for (Index i = 0; i < 15; ++i) h_again.col(i) = update_item(i, w, data, p.lambda_h, *m.content_map, z.col(i));
  EXPECT_LT(max_abs(h_again - h), 1e-12);
}

TEST(Train, ZeroContentReproducesContentFree) {
  Rng rng(12);
  const Instance inst = make_instance(rng, 30, 40, 1.0, 0.2, true);
  Hyperparams p;
  p.rank = 4;
  p.n_iters = 10;
  p.lambda_b = 0.05;
  const auto free = train(inst.data(), p, 99);
  const auto aware = train(inst.data(), Matrix::Zero(3, 40), p, 99);
  EXPECT_LE(max_abs(free.model.user_factors - aware.model.user_factors), 1e-12);
  EXPECT_LE(max_abs(free.model.item_factors - aware.model.item_factors), 1e-12);
  EXPECT_EQ(max_abs(*aware.model.content_map), 0.0);
}

// Central differences of the objective at a converged point: zero for W and
// H, and -2 lambda_h lambda_b B for B (its update carries the ridge offset
// that the reported objective leaves out).
TEST(Train, GradientVanishesAtConvergedPoint) {
  Rng rng(13);
  const Instance inst = make_instance(rng, 8, 10, 1.0, 0.4);
  const Matrix z = oracle::random_matrix(rng, 2, 10);
  Hyperparams p;
  p.rank = 2;
  p.n_iters = 3000;
  p.lambda_w = 0.5;
  p.lambda_h = 0.5;
  p.lambda_b = 0.1;
  const auto data = inst.data();
  FactorModel m = train(data, z, p, 5).model;
  const double step = 1e-5;
  auto central = [&](double& x) {
    const double keep = x;
    x = keep + step;
    const double up = objective(m, data, z);
    x = keep - step;
    const double down = objective(m, data, z);
    x = keep;
    return (up - down) / (2 * step);
  };
  for (int t = 0; t < 5; ++t) {
    const Index r = rng.below(2);
    EXPECT_LT(std::abs(central(m.user_factors(r, rng.below(8)))), 1e-6);
    EXPECT_LT(std::abs(central(m.item_factors(r, rng.below(10)))), 1e-6);
    const Index a = rng.below(2);
    const double expected = -2.0 * p.lambda_h * p.lambda_b * (*m.content_map)(r, a);
    EXPECT_LT(std::abs(central((*m.content_map)(r, a)) - expected), 1e-6);
  }
}

TEST(Predict, InMatrixExamples) {
  FactorModel m;
  m.user_factors = Matrix(2, 1);
  m.user_factors << 1, 2;
  m.item_factors = Matrix(2, 2);
  m.item_factors << 3, 5, -1, 7;
  EXPECT_EQ(predict_in_matrix(m, 0, 0), 1.0);
  const double before = predict_in_matrix(m, 0, 1);
  m.user_factors *= 2.0;
  EXPECT_EQ(predict_in_matrix(m, 0, 1), 2.0 * before);
  m.user_factors.setZero();
  EXPECT_EQ(predict_in_matrix(m, 0, 1), 0.0);
  EXPECT_EQ(kind_of([&] { predict_in_matrix(m, 0, 2); }), ErrorKind::kIndex);
}

TEST(Predict, OutOfMatrixExamples) {
  Rng rng(14);
  FactorModel m = random_model(rng, 3, 4, 5, 3, 1, 1);
  const Vector z = oracle::random_matrix(rng, 3, 1).col(0);
  EXPECT_EQ(predict_out_of_matrix(m, 2, Vector::Zero(3)), 0.0);
  m.content_map = Matrix::Identity(3, 3);
  EXPECT_NEAR(predict_out_of_matrix(m, 2, z), m.user_factors.col(2).dot(z), 1e-15);
  EXPECT_EQ(kind_of([&] { predict_out_of_matrix(m, 2, Vector::Zero(2)); }), ErrorKind::kShape);
  FactorModel plain = m;
  plain.content_map.reset();
  EXPECT_EQ(kind_of([&] { predict_out_of_matrix(plain, 0, z); }), ErrorKind::kCapability);
}

TEST(Predict, ScaleSymmetry) {
  Rng rng(15);
  FactorModel m = random_model(rng, 3, 4, 5, 2, 1, 1);
  const Vector z = oracle::random_matrix(rng, 2, 1).col(0);
  const double base = predict_out_of_matrix(m, 1, z);
  for (double s : {-3.0, 0.25, 7.0}) {
    FactorModel scaled = m;
    *scaled.content_map *= s;
    EXPECT_NEAR(predict_out_of_matrix(scaled, 1, z / s), base, 1e-12 * std::max(1.0, std::abs(base)));
  }
}

TEST(Predict, LargeItemPriorMakesBothPredictorsAgree) {
  Rng rng(16);
  const Instance inst = make_instance(rng, 30, 40, 1.0, 0.2);
  const Matrix z = oracle::random_matrix(rng, 3, 40);
  Hyperparams p;
  p.rank = 3;
  p.n_iters = 15;
  p.lambda_h = 1e6;
  const auto r = train(inst.data(), z, p, 2);
  double worst = 0.0;
  for (Index u = 0; u < 30; ++u) {
    for (Index i = 0; i < 40; ++i) {
      worst = std::max(worst, std::abs(predict_in_matrix(r.model, u, i) -
                                       predict_out_of_matrix(r.model, u, z.col(i))));
    }
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(ModelFile, RoundTripsBitExactly) {
  Rng rng(17);
  const Instance inst = make_instance(rng, 10, 12, 1.0, 0.3, true);
  const Matrix z = oracle::random_matrix(rng, 3, 12);
  Hyperparams p;
  p.rank = 4;
  p.n_iters = 3;
  p.base_confidence = 1.0;
  const auto r = train(inst.data(), z, p, 123);
  for (bool content : {true, false}) {
    ModelFile file{r.model, r.objective_trace, 123, "cafe01"};
    if (!content) file.model.content_map.reset();
    std::stringstream buffer;
    save_model(buffer, file);
    const ModelFile back = load_model(buffer);
    EXPECT_EQ(back.model.user_factors, file.model.user_factors);
    EXPECT_EQ(back.model.item_factors, file.model.item_factors);
    EXPECT_EQ(back.model.content_aware(), content);
    if (content) EXPECT_EQ(*back.model.content_map, *file.model.content_map);
    EXPECT_EQ(back.objective_trace, file.objective_trace);
    EXPECT_EQ(back.seed, 123u);
    EXPECT_EQ(back.config_hash, "cafe01");
    EXPECT_EQ(back.model.hyperparams.rank, 4);
    EXPECT_EQ(back.model.hyperparams.base_confidence, 1.0);
    EXPECT_EQ(back.model.hyperparams.lambda_b, p.lambda_b);
  }
  std::istringstream junk("not a model");
  EXPECT_THROW(load_model(junk), Error);
}

}  // namespace
}  // namespace wmfrec
