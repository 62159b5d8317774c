#include "doctest.h"

#include "memre/memory.hpp"
#include "support.hpp"

using namespace memre;
using namespace memre::testing;

namespace {

// Straight-line evaluation of the read weights, one slot and token at a time.
VectorR read_oracle(const MatrixR& x, const MatrixR& m, const MatrixR& w) {
  VectorR a = VectorR::Zero(x.rows());
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    std::vector<double> logits;
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      double z = 0;
      for (Eigen::Index s = 0; s < m.cols(); ++s)
        for (Eigen::Index h = 0; h < x.cols(); ++h) z += m(k, s) * w(s, h) * x(t, h);
      logits.push_back(z);
    }
    double denom = 0;
    for (double z : logits) denom += std::exp(z);
    for (Eigen::Index t = 0; t < x.rows(); ++t) a(t) += std::exp(logits[static_cast<std::size_t>(t)]) / denom;
  }
  return a;
}

VectorR bilinear_oracle(const VectorR& x, const MatrixR& m, const MatrixR& w) {
  VectorR out(m.rows());
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    double acc = 0;
    for (Eigen::Index d = 0; d < x.size(); ++d)
      for (Eigen::Index s = 0; s < m.cols(); ++s) acc += x(d) * w(d, s) * m(k, s);
    out(k) = acc;
  }
  return out;
}

struct Fixture {
  ad::ParameterStore<Real> store;
  TypeVocabulary vocab = micro_vocabulary();
  MemoryConfig config;
  std::unique_ptr<MemoryModule> memory;

  explicit Fixture(int h = 4, int slot = 3, std::uint64_t seed = 1) {
    config.entity_slot_size = slot;
    config.relation_slot_size = slot;
    Rng rng(seed);
    memory = std::make_unique<MemoryModule>(store, vocab, config, h, h, h, rng);
  }
};

}  // namespace

TEST_CASE("read weights: closed-form cases") {
  Rng rng(1);
  const MatrixR x = random_matrix(rng, 4, 2);
  const MatrixR m = random_matrix(rng, 3, 2);
  const VectorR a = read_weights<Real>(x, m, MatrixR::Zero(2, 2));
  CHECK(a.isApprox(VectorR::Constant(4, 0.75)));

  const VectorR single = read_weights<Real>(random_matrix(rng, 1, 2), m, random_matrix(rng, 2, 2));
  CHECK(single(0) == doctest::Approx(3.0));

  MatrixR xi(2, 2), mi(2, 2), wi(2, 2);
  xi << 1, 0, 0, 2;
  mi << 1, -1, 0, 1;
  wi << 1, 1, 0, 1;
  // slot 0: logits [1, 0]; slot 1: logits [0, 2]
  const double e = std::exp(1.0), e2 = std::exp(2.0);
  VectorR expected(2);
  expected << e / (e + 1) + 1 / (1 + e2), 1 / (e + 1) + e2 / (1 + e2);
  CHECK(read_weights<Real>(xi, mi, wi).isApprox(expected, 1e-12));
  CHECK(read_oracle(xi, mi, wi).isApprox(expected, 1e-12));

  CHECK_THROWS_AS(read_weights<Real>(xi, mi, MatrixR::Zero(3, 2)), ConfigError);
}

TEST_CASE("read weights agree with the straight-line oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = random_int(rng, 1, 6), h = random_int(rng, 1, 5), s = random_int(rng, 1, 5), m = random_int(rng, 1, 5);
    const MatrixR x = random_matrix(rng, n, h), mem = random_matrix(rng, m, s), w = random_matrix(rng, s, h);
    CHECK((read_weights<Real>(x, mem, w) - read_oracle(x, mem, w)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

// A single row always receives weight exactly m, so the open interval needs
// n >= 2. Entries in [-1, 1] with s, h <= 4 keep logit gaps below 32, where
// exp(-gap) is still visible next to 1 in double precision.
TEST_CASE("attention weights sum to slot count and lie in (0, m)") {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = random_int(rng, 2, 8), h = random_int(rng, 1, 4), s = random_int(rng, 1, 4), m = random_int(rng, 1, 6);
    const VectorR a = read_weights<Real>(random_matrix(rng, n, h), random_matrix(rng, m, s), random_matrix(rng, s, h));
    CHECK(a.sum() == doctest::Approx(m).epsilon(1e-9));
    CHECK(a.minCoeff() > 0);
    CHECK(a.maxCoeff() < m);
  }
}

TEST_CASE("read weights are permutation equivariant over rows") {
  Rng rng(4);
  const MatrixR x = random_matrix(rng, 5, 3), m = random_matrix(rng, 2, 4), w = random_matrix(rng, 4, 3);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  const MatrixR px = perm * x;
  const VectorR a = read_weights<Real>(x, m, w);
  const VectorR pa = read_weights<Real>(px, m, w);
  CHECK(pa.isApprox(perm * a, 1e-12));
  CHECK(extend_representation<Real>(px, pa).isApprox(perm * extend_representation<Real>(x, a), 1e-12));
}

TEST_CASE("extend_representation scales rows") {
  Rng rng(5);
  const MatrixR x = random_matrix(rng, 2, 3);
  CHECK(extend_representation<Real>(x, VectorR::Ones(2)) == x);
  VectorR a(2);
  a << 2, 0.5;
  MatrixR expected = x;
  expected.row(0) *= 2;
  expected.row(1) *= 0.5;
  CHECK(extend_representation<Real>(x, a).isApprox(expected));

  const MatrixR y = random_matrix(rng, 3, 4);
  const VectorR b = random_matrix(rng, 3, 1, 0, 2);
  MatrixR loop(3, 4);
  for (int t = 0; t < 3; ++t)
    for (int c = 0; c < 4; ++c) loop(t, c) = b(t) * y(t, c);
  CHECK((extend_representation<Real>(y, b) - loop).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(extend_representation<Real>(MatrixR(2.5 * y), b).isApprox(2.5 * extend_representation<Real>(y, b)));
}

TEST_CASE("fusion is the element-wise mean") {
  Rng rng(6);
  const MatrixR x = random_matrix(rng, 3, 4);
  CHECK(fuse<Real>(x, x, x).isApprox(x));
  const MatrixR zero = MatrixR::Zero(3, 4);
  CHECK(fuse<Real>(zero, zero, zero) == zero);

  const MatrixR m = random_matrix(rng, 2, 2), we = random_matrix(rng, 2, 4), wr = random_matrix(rng, 2, 4);
  const VectorR ae = read_weights<Real>(x, m, we), ar = read_weights<Real>(x, m, wr);
  const VectorR scale = (VectorR::Ones(3) + ae + ar) / 3;
  const MatrixR fused = fuse<Real>(x, extend_representation<Real>(x, ae), extend_representation<Real>(x, ar));
  CHECK((fused - MatrixR(scale.asDiagonal() * x)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(fuse<Real>(x, zero, MatrixR::Zero(2, 4)), ConfigError);
}

TEST_CASE("bilinear similarity") {
  CHECK(bilinear_similarity<Real>(VectorR::Zero(3), MatrixR::Ones(4, 2), MatrixR::Ones(3, 2)).isZero());
  Rng rng(7);
  const VectorR x = random_matrix(rng, 3, 1);
  CHECK(bilinear_similarity<Real>(x, MatrixR::Identity(3, 3), MatrixR::Identity(3, 3)).isApprox(x));

  MatrixR m(3, 2), w(2, 2);
  m << 1, 2, -1, 0, 3, 1;
  w << 2, 0, 1, -1;
  VectorR xi(2);
  xi << 1, 2;
  // W^T x = [4, -2]
  VectorR expected(3);
  expected << 0, -4, 10;
  CHECK(bilinear_similarity<Real>(xi, m, w) == expected);
  CHECK(bilinear_oracle(xi, m, w) == expected);
  CHECK_THROWS_AS(bilinear_similarity<Real>(xi, m, MatrixR::Zero(3, 2)), ConfigError);
}

TEST_CASE("entity distribution and relation probabilities") {
  CHECK(softmax<Real>(VectorR::Zero(4)).isApprox(VectorR::Constant(4, 0.25)));
  VectorR z(2);
  z << std::log(2.0), 0;
  CHECK(softmax<Real>(z)(0) == doctest::Approx(2.0 / 3));
  CHECK(softmax<Real>(z)(1) == doctest::Approx(1.0 / 3));
  CHECK(sigmoid<Real>(VectorR::Zero(3)).isApprox(VectorR::Constant(3, 0.5)));

  VectorR big(3);
  big << 5, 20, 40;
  const VectorR p = sigmoid<Real>(big);
  CHECK(p(0) < p(1));
  CHECK(p(1) <= p(2));
  CHECK(p(2) == doctest::Approx(1.0));
  CHECK(sigmoid<Real>(VectorR::Constant(1, -800))(0) >= 0);

  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const VectorR x = random_matrix(rng, 3, 1);
    const MatrixR m = random_matrix(rng, 4, 2), w = random_matrix(rng, 3, 2);
    const VectorR s = bilinear_oracle(x, m, w);
    VectorR soft(4), sig(4);
    double denom = 0;
    for (int k = 0; k < 4; ++k) denom += std::exp(s(k));
    for (int k = 0; k < 4; ++k) {
      soft(k) = std::exp(s(k)) / denom;
      sig(k) = 1 / (1 + std::exp(-s(k)));
    }
    const VectorR dist = entity_type_distribution<Real>(x, m, w);
    CHECK((dist - soft).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dist.minCoeff() > 0);
    const VectorR probs = relation_type_probabilities<Real>(x, m, w);
    CHECK((probs - sig).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(probs.minCoeff() > 0);
    CHECK(probs.maxCoeff() < 1);
  }
}

TEST_CASE("slot counts follow the vocabulary") {
  for (int k_r : {1, 2, 96}) {
    std::vector<std::string> rels;
    for (int r = 0; r < k_r; ++r) rels.push_back("r" + std::to_string(r));
    ad::ParameterStore<Real> store;
    Rng rng(1);
    MemoryModule mem(store, TypeVocabulary({"a", "b", "c", "d", "e", "f"}, rels), MemoryConfig{}, 8, 8, 8, rng);
    CHECK(mem.slot_count(MemoryKind::entity) == 6);
    CHECK(mem.slot_count(MemoryKind::relation) == k_r);
  }
}

TEST_CASE("memory module reads agree with the pure operations") {
  Fixture f;
  Rng rng(10);
  const MatrixR x = random_matrix(rng, 5, 4);
  ad::Tape<Real> tape(false);
  const auto xv = tape.constant(x);
  for (auto i : {InputKind::tokens, InputKind::spans}) {
    const VectorR ae = f.memory->read(xv, i, MemoryKind::entity).value().col(0);
    const VectorR ar = f.memory->read(xv, i, MemoryKind::relation).value().col(0);
    CHECK(ae.isApprox(read_weights<Real>(x, f.memory->memory(MemoryKind::entity).value,
                                         f.memory->read_projection(i, MemoryKind::entity).value)));
    const MatrixR expected = fuse<Real>(x, extend_representation<Real>(x, ae), extend_representation<Real>(x, ar));
    CHECK((f.memory->extend(xv, i).value() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  const MatrixR e = random_matrix(rng, 2, 4);
  const auto scores = f.memory->entity_scores(tape.constant(e)).value();
  for (int r = 0; r < 2; ++r) {
    const VectorR expected = bilinear_similarity<Real>(e.row(r).transpose(), f.memory->memory(MemoryKind::entity).value,
                                                       f.memory->write_projection(MemoryKind::entity).value);
    CHECK((scores.row(r).transpose() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("disabled read paths contribute the input and bypass returns it unchanged") {
  Fixture f;
  Rng rng(11);
  const MatrixR x = random_matrix(rng, 3, 4);

  SUBCASE("one path disabled") {
    f.config.read_enabled[0][1] = false;
    Rng init(1);
    ad::ParameterStore<Real> store;
    MemoryModule mem(store, f.vocab, f.config, 4, 4, 4, init);
    ad::Tape<Real> tape(false);
    const auto xv = tape.constant(x);
    const VectorR ae = mem.read(xv, InputKind::tokens, MemoryKind::entity).value().col(0);
    const MatrixR expected = fuse<Real>(x, extend_representation<Real>(x, ae), x);
    CHECK((mem.extend(xv, InputKind::tokens).value() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("all paths disabled") {
    f.config.set_all_reads(false);
    Rng init(1);
    ad::ParameterStore<Real> store;
    MemoryModule mem(store, f.vocab, f.config, 4, 4, 4, init);
    ad::Tape<Real> tape(false);
    CHECK(mem.extend(tape.constant(x), InputKind::spans).value() == x);
  }
  SUBCASE("bypass") {
    f.memory->set_bypass(true);
    ad::Tape<Real> tape(false);
    CHECK(f.memory->extend(tape.constant(x), InputKind::tokens).value() == x);
  }
}

TEST_CASE("read gradient flag controls flow into the memories through reads") {
  Rng rng(12);
  const MatrixR x = random_matrix(rng, 4, 4);
  const auto fused_sum = [&](Fixture& f) {
    return [&f, &x](ad::Tape<Real>& t) { return ad::sum(f.memory->extend(t.constant(x), InputKind::tokens)); };
  };

  Fixture blocked;
  blocked.memory->set_read_gradient(false);
  blocked.store.zero_grad();
  {
    ad::Tape<Real> tape;
    auto l = fused_sum(blocked)(tape);
    tape.backward(l);
    blocked.store.collect_gradients(tape);
  }
  CHECK(blocked.memory->memory(MemoryKind::entity).grad.isZero(0));
  CHECK(blocked.memory->memory(MemoryKind::relation).grad.isZero(0));
  CHECK_FALSE(blocked.memory->read_projection(InputKind::tokens, MemoryKind::entity).grad.isZero(0));

  Fixture open;
  open.memory->set_read_gradient(true);
  const auto check = grad_check(open.store, fused_sum(open));
  INFO(check.worst);
  CHECK(check.ok());
  CHECK_FALSE(open.memory->memory(MemoryKind::entity).grad.isZero(1e-9));

  // Entity classification still writes M_E when reads are blocked.
  Fixture write;
  const MatrixR e = random_matrix(rng, 1, 4);
  const auto entity_loss = [&](ad::Tape<Real>& t) {
    return ad::softmax_cross_entropy(write.memory->entity_scores(t.constant(e)), {1});
  };
  const auto wcheck = grad_check(write.store, entity_loss);
  INFO(wcheck.worst);
  CHECK(wcheck.ok());
  CHECK_FALSE(write.memory->memory(MemoryKind::entity).grad.isZero(1e-9));
}

TEST_CASE("gradients of a loss built from reads, fusion and both classifiers match finite differences") {
  Rng rng(13);
  int passed = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = random_int(rng, 1, 4), h = random_int(rng, 1, 4), s = random_int(rng, 1, 4);
    Fixture f(h, s, 100 + static_cast<std::uint64_t>(trial));
    f.memory->set_read_gradient(trial % 2 == 0);
    const MatrixR x = random_matrix(rng, n, h);
    const MatrixR mix = random_matrix(rng, h, h);
    const auto loss = [&](ad::Tape<Real>& t) {
      auto fused = f.memory->extend(t.constant(x), InputKind::spans);
      auto rows = ad::matmul(fused, t.constant(mix));
      auto ent = ad::softmax_cross_entropy(f.memory->entity_scores(rows), std::vector<int>(static_cast<std::size_t>(n), 0));
      auto rel = ad::bce_with_logits(f.memory->relation_scores(rows), MatrixR(MatrixR::Ones(n, 2)));
      return ad::add(ent, rel);
    };
    // With reads blocked, M's tape gradient deliberately omits the read path,
    // so only the projections can be compared with finite differences.
    std::vector<std::string> only;
    if (!f.memory->read_gradient()) {
      for (std::size_t i = 0; i < f.store.size(); ++i)
        if (f.store[i].name.rfind("memory.M_", 0) != 0) only.push_back(f.store[i].name);
    }
    const auto check = grad_check(f.store, loss, 1e-4, 1e-3, 1e-7, only);
    INFO(check.worst);
    CHECK(check.ok());
    passed += check.ok();
  }
  CHECK(passed == 20);
}
