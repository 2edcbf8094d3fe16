#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "nnkm/oracle.hpp"

using namespace nnkm;
using nnkm::testing::random_matrix;

namespace {

Dictionary identity_dictionary(const Matrix& atoms, KernelSpec kernel) {
  return Dictionary(atoms, Matrix::Identity(atoms.cols(), atoms.cols()), kernel);
}

CodingConfig sparsity(int k) {
  CodingConfig c;
  c.sparsity_k = k;
  return c;
}

void expect_well_formed(const SparseCode& code, int k, Eigen::Index atoms) {
  EXPECT_LE(static_cast<Eigen::Index>(code.size()), std::min<Eigen::Index>(k, atoms));
  for (std::size_t i = 0; i < code.size(); ++i) {
    EXPECT_GT(code.entries[i].weight, 0.0);
    EXPECT_GE(code.entries[i].atom, 0);
    EXPECT_LT(code.entries[i].atom, atoms);
    if (i > 0) {
      EXPECT_LT(code.entries[i - 1].atom, code.entries[i].atom);
    }
  }
}

}  // namespace

TEST(SelectCandidates, TopK) {
  Vector s(3);
  s << 0.1, 0.9, 0.5;
  EXPECT_EQ(select_candidates(s, 2), (std::vector<Eigen::Index>{1, 2}));
}

TEST(SelectCandidates, TiesGoToLowestIndex) {
  EXPECT_EQ(select_candidates(Vector::Constant(3, 0.5), 1), (std::vector<Eigen::Index>{0}));
  Vector s(5);
  s << 0.2, 0.7, 0.7, 0.1, 0.7;
  EXPECT_EQ(select_candidates(s, 2), (std::vector<Eigen::Index>{1, 2}));
}

TEST(SelectCandidates, ClampsToDictionarySize) {
  Vector s(3);
  s << 0.3, 0.2, 0.1;
  EXPECT_EQ(select_candidates(s, 10), (std::vector<Eigen::Index>{0, 1, 2}));
}

TEST(SelectCandidates, EmptyDictionaryThrows) { EXPECT_THROW(select_candidates(Vector(0), 2), Error); }

TEST(SelectCandidates, MatchesFullSort) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    Vector s(50);
    // Coarse values so ties actually happen.
    for (Eigen::Index i = 0; i < 50; ++i) s[i] = static_cast<double>(rng.uniform_below(20));
    std::vector<Eigen::Index> order(50);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return s[a] > s[b]; });
    order.resize(7);
    std::sort(order.begin(), order.end());
    EXPECT_EQ(select_candidates(s, 7), order);
  }
}

TEST(CodeOne, ExactAtomHit) {
  Rng rng(1);
  const Matrix atoms = random_matrix(3, 4, rng);
  const Dictionary dict = identity_dictionary(atoms, KernelSpec::gaussian());
  const SparseCode code = code_one(atoms.col(2), dict, sparsity(3));
  ASSERT_EQ(code.size(), 1u);
  EXPECT_EQ(code.entries[0].atom, 2);
  EXPECT_NEAR(code.entries[0].weight, 1.0, 1e-12);
  EXPECT_NEAR(reconstruction_error(code, dict.query_similarities(atoms.col(2)), dict), 0.0, 1e-12);
}

TEST(CodeOne, SymmetricLinearSplit) {
  Matrix atoms(2, 2);
  atoms << 1, 1, 1, -1;
  const Dictionary dict = identity_dictionary(atoms, KernelSpec::linear());
  Vector q(2);
  q << 1, 0;
  const SparseCode code = code_one(q, dict, sparsity(2));
  ASSERT_EQ(code.size(), 2u);
  EXPECT_NEAR(code.entries[0].weight, 0.5, 1e-15);
  EXPECT_NEAR(code.entries[1].weight, 0.5, 1e-15);
}

TEST(CodeOne, AllZeroSimilaritiesGiveEmptyCode) {
  Matrix atoms(3, 2);
  atoms << 1, 0, 0, 1, 0, 0;
  const Dictionary dict = identity_dictionary(atoms, KernelSpec::linear());
  Vector q(3);
  q << 0, 0, 2;
  const SparseCode code = code_one(q, dict, sparsity(2));
  EXPECT_TRUE(code.empty());
  EXPECT_EQ(reconstruction_error(code, dict.query_similarities(q), dict), 4.0);
}

TEST(CodeOne, EmptyCodeErrorIsSelfSimilarity) {
  SparseCode code;
  code.query_self_similarity = 0.75;
  EXPECT_EQ(reconstruction_error(code, Vector::Ones(3), Matrix::Identity(3, 3)), 0.75);
}

TEST(CodeOne, SparsityAboveAtomCountIsClamped) {
  Rng rng(2);
  const Matrix atoms = random_matrix(4, 3, rng);
  const Dictionary dict = identity_dictionary(atoms, KernelSpec::gaussian());
  const Matrix q = random_matrix(4, 20, rng);
  for (Eigen::Index i = 0; i < q.cols(); ++i) expect_well_formed(code_one(q.col(i), dict, sparsity(10)), 10, 3);
}

TEST(CodeOne, DimensionMismatchThrows) {
  Rng rng(3);
  const Dictionary dict = identity_dictionary(random_matrix(4, 3, rng), KernelSpec::gaussian());
  EXPECT_THROW(code_one(Vector::Ones(3), dict, sparsity(2)), Error);
}

TEST(CodeOne, InvalidConfigRejected) {
  Rng rng(3);
  const Dictionary dict = identity_dictionary(random_matrix(2, 3, rng), KernelSpec::gaussian());
  CodingConfig c;
  c.sparsity_k = 0;
  EXPECT_THROW(code_one(Vector::Ones(2), dict, c), Error);
  c = {};
  c.prune_rel_tol = 1.0;
  EXPECT_THROW(code_one(Vector::Ones(2), dict, c), Error);
  c = {};
  c.nnls_max_iter = 0;
  EXPECT_THROW(code_one(Vector::Ones(2), dict, c), Error);
}

TEST(CodeOne, OneSparseKMeansModePicksNearestAtomWithUnitWeight) {
  Matrix atoms(1, 2);
  atoms << 1.0, 3.0;
  const Dictionary dict = identity_dictionary(atoms, KernelSpec::linear());
  Vector q(1);
  q << 2.2;
  // Most similar atom is 3 (similarity 6.6), nearest is also 3 (0.8 vs 1.2).
  SparseCode code = code_one(q, dict, sparsity(1));
  ASSERT_EQ(code.size(), 1u);
  EXPECT_EQ(code.entries[0].atom, 1);
  EXPECT_EQ(code.entries[0].weight, 1.0);
  q << 1.5;
  // Nearest is atom 0 although atom 1 is more similar under the linear kernel.
  code = code_one(q, dict, sparsity(1));
  EXPECT_EQ(code.entries[0].atom, 0);
  CodingConfig plain = sparsity(1);
  plain.kmeans_when_one_sparse = false;
  code = code_one(q, dict, plain);
  ASSERT_EQ(code.size(), 1u);
  EXPECT_EQ(code.entries[0].atom, 1);
  EXPECT_NEAR(code.entries[0].weight, 0.5, 1e-15);
}

TEST(CodeOne, NeverWorseThanBestSingleCandidate) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const Matrix atoms = random_matrix(3, 8, rng);
    const Dictionary dict = identity_dictionary(atoms, KernelSpec::gaussian(1.2));
    const Vector q = random_matrix(3, 1, rng).col(0);
    const Vector s = dict.query_similarities(q);
    const SparseCode code = code_one(q, dict, sparsity(4));
    Eigen::Index j = 0;
    s.maxCoeff(&j);
    const double theta = std::max(0.0, s[j] / dict.atom_gram()(j, j));
    const double single = 1.0 - 2.0 * theta * s[j] + theta * theta * dict.atom_gram()(j, j);
    EXPECT_LE(reconstruction_error(code, s, dict), single + 1e-12);
    expect_well_formed(code, 4, 8);
  }
}

TEST(CodeOne, DuplicateAtomsGetAtMostOneWeight) {
  Rng rng(5);
  Matrix atoms = random_matrix(3, 5, rng);
  atoms.col(3) = atoms.col(1);
  const Dictionary dict = identity_dictionary(atoms, KernelSpec::gaussian());
  for (int t = 0; t < 100; ++t) {
    const Vector q = atoms.col(1) + 0.3 * random_matrix(3, 1, rng).col(0);
    const SparseCode code = code_one(q, dict, sparsity(5));
    int hits = 0;
    for (const auto& e : code.entries) hits += (e.atom == 1 || e.atom == 3) ? 1 : 0;
    EXPECT_LE(hits, 1);
  }
}

TEST(CodeOne, MatchesExhaustiveSearchWhenCandidatesContainOptimum) {
  Rng rng(6);
  int matched = 0;
  int skipped = 0;
  for (int t = 0; t < 200; ++t) {
    const Matrix atoms = random_matrix(2, 5, rng);
    const Dictionary dict = identity_dictionary(atoms, KernelSpec::gaussian(0.8));
    const Vector q = random_matrix(2, 1, rng).col(0);
    const auto best = oracle::best_subset_code(q, dict, 3);
    const Vector s = dict.query_similarities(q);
    const auto candidates = select_candidates(s, 3);
    const bool contained = std::all_of(best.support.begin(), best.support.end(), [&](Eigen::Index a) {
      return std::find(candidates.begin(), candidates.end(), a) != candidates.end();
    });
    if (!contained) {
      ++skipped;
      continue;
    }
    const SparseCode code = code_one(q, dict, sparsity(3));
    EXPECT_NEAR(reconstruction_error(code, s, dict), best.objective, 1e-8) << "instance " << t;
    ++matched;
  }
  EXPECT_GT(matched, 100);
  RecordProperty("outside_candidate_set", skipped);
}

TEST(CodeOne, CandidatePoolWiderThanBudgetKeepsBudget) {
  Rng rng(7);
  const Matrix atoms = random_matrix(3, 12, rng);
  const Dictionary dict = identity_dictionary(atoms, KernelSpec::gaussian(2.0));
  CodingConfig c = sparsity(2);
  c.candidate_pool = 8;
  for (int t = 0; t < 50; ++t) {
    const Vector q = random_matrix(3, 1, rng).col(0);
    expect_well_formed(code_one(q, dict, c), 2, 12);
  }
}

TEST(ReconstructionError, LinearKernelMatchesInputSpace) {
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    const Matrix support = random_matrix(4, 6, rng);
    const Matrix a = random_matrix(6, 3, rng);
    const Dictionary dict(support, a, KernelSpec::linear());
    const Vector q = random_matrix(4, 1, rng).col(0);
    const SparseCode code = code_one(q, dict, sparsity(2));
    const Vector recon = support * a * code.dense(3);
    const double explicit_error = (q - recon).squaredNorm();
    EXPECT_NEAR(reconstruction_error(code, dict.query_similarities(q), dict), explicit_error, 1e-10);
  }
}

TEST(CodeBatch, SingleQueryEqualsCodeOne) {
  Rng rng(10);
  const Dictionary dict = identity_dictionary(random_matrix(3, 6, rng), KernelSpec::gaussian());
  const Matrix q = random_matrix(3, 1, rng);
  const CodeBatch batch = code_batch(q, dict, sparsity(3));
  ASSERT_TRUE(batch.ok());
  EXPECT_EQ(batch.codes[0], code_one(q.col(0), dict, sparsity(3)));
}

TEST(CodeBatch, IdenticalToSequentialLoopAndThreadCount) {
  Rng rng(11);
  const Dictionary dict(random_matrix(5, 20, rng), random_matrix(20, 8, rng).cwiseAbs(), KernelSpec::gaussian(1.5));
  const Matrix q = random_matrix(5, 64, rng);
  const CodeBatch serial = code_batch(q, dict, sparsity(4), 1);
  const CodeBatch parallel = code_batch(q, dict, sparsity(4), 4);
  ASSERT_TRUE(serial.ok());
  for (Eigen::Index i = 0; i < 64; ++i) {
    const SparseCode one = code_one(q.col(i), dict, sparsity(4));
    EXPECT_EQ(serial.codes[static_cast<std::size_t>(i)], one);
    EXPECT_EQ(parallel.codes[static_cast<std::size_t>(i)], one);
    EXPECT_EQ(serial.errors[static_cast<std::size_t>(i)], parallel.errors[static_cast<std::size_t>(i)]);
  }
}

TEST(CodeBatch, PermutationPermutesCodes) {
  Rng rng(12);
  const Dictionary dict = identity_dictionary(random_matrix(3, 7, rng), KernelSpec::gaussian());
  const Matrix q = random_matrix(3, 10, rng);
  std::vector<Eigen::Index> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  Matrix permuted(3, 10);
  for (Eigen::Index i = 0; i < 10; ++i) permuted.col(i) = q.col(perm[static_cast<std::size_t>(i)]);
  const CodeBatch a = code_batch(q, dict, sparsity(3));
  const CodeBatch b = code_batch(permuted, dict, sparsity(3));
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(b.codes[i], a.codes[static_cast<std::size_t>(perm[i])]);
}

TEST(CodeBatch, FailureIsReportedWithIndexAndOthersStillCoded) {
  Rng rng(13);
  const Dictionary dict = identity_dictionary(random_matrix(3, 4, rng), KernelSpec::cosine());
  Matrix q = random_matrix(3, 5, rng);
  q.col(2).setZero();
  const CodeBatch batch = code_batch(q, dict, sparsity(2));
  ASSERT_EQ(batch.failures.size(), 1u);
  EXPECT_EQ(batch.failures[0].index, 2u);
  EXPECT_TRUE(std::isnan(batch.errors[2]));
  for (const std::size_t i : {0u, 1u, 3u, 4u}) EXPECT_FALSE(batch.codes[i].empty());
  try {
    batch.throw_if_failed();
    FAIL();
  } catch (const SampleError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
}
