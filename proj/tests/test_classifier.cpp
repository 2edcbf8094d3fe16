#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace nnkm;
using nnkm::testing::random_features;

namespace {

FitConfig config(int atoms, int k, std::uint64_t seed = 0) {
  FitConfig c;
  c.atoms_M = atoms;
  c.sparsity_k = k;
  c.seed = seed;
  return c;
}

FeatureMatrix labeled_blobs(Eigen::Index per_class, const std::vector<int>& labels, std::uint64_t seed) {
  FeatureMatrix f = random_features(2, per_class * static_cast<Eigen::Index>(labels.size()), seed);
  f.labels.emplace();
  for (std::size_t c = 0; c < labels.size(); ++c) {
    for (Eigen::Index i = 0; i < per_class; ++i) {
      const Eigen::Index j = static_cast<Eigen::Index>(c) * per_class + i;
      f.data(0, j) = 0.3 * f.data(0, j) + 3.0 * static_cast<double>(c);
      f.labels->push_back(labels[c]);
    }
  }
  return f;
}

}  // namespace

TEST(Accuracy, Examples) {
  EXPECT_EQ(accuracy({1, 2, 3}, {1, 2, 3}), 1.0);
  EXPECT_EQ(accuracy({0, 0}, {1, 1}), 0.0);
  EXPECT_EQ(accuracy({0, 1, 1, 0}, {0, 1, 0, 0}), 0.75);
  EXPECT_THROW(accuracy({0, 1}, {0}), Error);
}

TEST(FitPerClass, SingleClassEqualsPlainFit) {
  FeatureMatrix f = labeled_blobs(30, {0}, 1);
  const ClassifierModel model = fit_per_class(f, KernelSpec::gaussian(), config(5, 3, 7));
  ASSERT_EQ(model.classes(), 1u);
  EXPECT_EQ(model.class_ids, std::vector<int>{0});
  f.labels.reset();
  const FitResult plain = fit(f, KernelSpec::gaussian(), config(5, 3, 7));
  EXPECT_EQ(model.dictionaries[0].support(), plain.dictionary.support());
  EXPECT_EQ(model.dictionaries[0].coefficients(), plain.dictionary.coefficients());
}

TEST(FitPerClass, SwappedLabelsSwapDictionaries) {
  // With every sample an atom the dictionary does not depend on the seed,
  // so the per-class seed offset cannot mask the swap.
  const FeatureMatrix f = labeled_blobs(6, {0, 1}, 2);
  FeatureMatrix swapped = f;
  for (int& l : *swapped.labels) l = 1 - l;
  const auto a = fit_per_class(f, KernelSpec::gaussian(), config(6, 1));
  const auto b = fit_per_class(swapped, KernelSpec::gaussian(), config(6, 1));
  EXPECT_EQ(a.dictionaries[0].support(), b.dictionaries[1].support());
  EXPECT_EQ(a.dictionaries[1].support(), b.dictionaries[0].support());
}

TEST(FitPerClass, SmallClassIsNamed) {
  FeatureMatrix f = labeled_blobs(10, {0, 4}, 3);
  (*f.labels)[15] = 9;
  (*f.labels)[16] = 9;
  try {
    fit_per_class(f, KernelSpec::gaussian(), config(5, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("class 9"), std::string::npos) << e.what();
  }
}

TEST(FitPerClass, NeedsLabels) {
  EXPECT_THROW(fit_per_class(random_features(2, 20, 4), KernelSpec::gaussian(), config(3, 2)), Error);
}

TEST(FitPerClass, PerClassSeedIsOffsetByClassId) {
  const FeatureMatrix f = labeled_blobs(25, {3}, 5);
  const auto model = fit_per_class(f, KernelSpec::gaussian(), config(4, 2, 10));
  EXPECT_EQ(model.dictionaries[0].meta().seed, 13u);
}

TEST(FitPerClass, SyntheticArcsTrainWithinIterationCap) {
  SynthSpec spec;
  spec.seed = 1;
  const auto split = make_synthetic(spec);
  std::vector<FitReport> reports;
  const auto model = fit_per_class(split.train, KernelSpec::gaussian(), config(10, 5, 1), &reports);
  ASSERT_EQ(model.classes(), 4u);
  for (const auto& r : reports) {
    EXPECT_LE(r.iterations(), 10);
    EXPECT_TRUE(r.monotone());
  }
}

TEST(Classify, ExactAtomQueryHasZeroErrorForItsClass) {
  const FeatureMatrix f = labeled_blobs(8, {0, 1}, 6);
  const auto model = fit_per_class(f, KernelSpec::gaussian(), config(8, 2));
  const Classification r = classify(Matrix(f.data.col(3)), model, coding_for(model));
  EXPECT_NEAR(r.errors(0, 0), 0.0, 1e-12);
  EXPECT_GT(r.errors(0, 1), 0.0);
  EXPECT_EQ(r.labels[0], 0);
}

TEST(Classify, SingleClassModelPredictsThatClass) {
  const FeatureMatrix f = labeled_blobs(20, {7}, 7);
  const auto model = fit_per_class(f, KernelSpec::gaussian(), config(4, 2));
  const FeatureMatrix q = random_features(2, 30, 8);
  const Classification r = classify(q, model, coding_for(model));
  for (const int l : r.labels) EXPECT_EQ(l, 7);
}

TEST(Classify, SelfConsistentOnZeroObjectiveModel) {
  const FeatureMatrix f = labeled_blobs(6, {0, 1, 2}, 9);
  const auto model = fit_per_class(f, KernelSpec::gaussian(0.5), config(6, 1));
  const Classification r = classify(f, model, coding_for(model));
  for (Eigen::Index q = 0; q < f.samples(); ++q) {
    const int truth = (*f.labels)[static_cast<std::size_t>(q)];
    EXPECT_NEAR(r.errors(q, truth), 0.0, 1e-12);
    EXPECT_EQ(r.labels[static_cast<std::size_t>(q)], truth);
  }
  EXPECT_GE(r.errors.minCoeff(), 0.0);
}

TEST(Classify, DimensionMismatchThrows) {
  const FeatureMatrix f = labeled_blobs(6, {0, 1}, 10);
  const auto model = fit_per_class(f, KernelSpec::gaussian(), config(3, 2));
  EXPECT_THROW(classify(Matrix::Ones(3, 2), model, coding_for(model)), Error);
}

TEST(Classify, SyntheticArcsBeatOneSparseLinearBaseline) {
  SynthSpec spec;
  spec.seed = 2;
  const auto split = make_synthetic(spec);
  const auto nnk = fit_per_class(split.train, KernelSpec::gaussian(), config(10, 5, 2));
  const auto km = fit_per_class(split.train, KernelSpec::linear(), config(10, 1, 2));
  const double a = accuracy(classify(split.test, nnk, coding_for(nnk)).labels, *split.test.labels);
  const double b = accuracy(classify(split.test, km, coding_for(km)).labels, *split.test.labels);
  EXPECT_GE(a, 0.95);
  EXPECT_GE(a, b);
}

TEST(PredictFromErrors, TiesGoToLowestClassId) {
  Matrix e(2, 3);
  e << 0.5, 0.2, 0.2,
       0.1, 0.1, 0.1;
  EXPECT_EQ(predict_from_errors(e, {9, 4, 2}), (std::vector<int>{2, 2}));
  EXPECT_EQ(predict_from_errors(e, {1, 4, 8}), (std::vector<int>{4, 1}));
}

TEST(PredictFromErrors, InvariantToCommonPositiveScale) {
  Rng rng(11);
  const Matrix e = nnkm::testing::random_matrix(40, 4, rng).cwiseAbs();
  const std::vector<int> ids{0, 1, 2, 3};
  EXPECT_EQ(predict_from_errors(e, ids), predict_from_errors(3.7 * e, ids));
}

TEST(ClassifierModel, ValidationCatchesMismatches) {
  const FeatureMatrix f = labeled_blobs(10, {0, 1}, 12);
  auto model = fit_per_class(f, KernelSpec::gaussian(), config(3, 2));
  model.class_ids = {1, 1};
  EXPECT_THROW(model.validate(), Error);
  model.class_ids = {0};
  EXPECT_THROW(model.validate(), Error);
  auto other = fit_per_class(f, KernelSpec::linear(), config(3, 2));
  model.class_ids = {0, 1};
  model.dictionaries[1] = other.dictionaries[1];
  EXPECT_THROW(model.validate(), Error);
}
