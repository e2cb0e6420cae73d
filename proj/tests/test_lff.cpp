#include <doctest.h>

#include <Eigen/Core>

#include "gradcheck.hpp"
#include "icftab/lff.hpp"

using namespace icftab;
using Rm = RowMatrix<double>;

namespace {

Rm random_rows(Eigen::Index n, Eigen::Index c, unsigned seed) {
  std::srand(seed);
  return Rm::Random(n, c);
}

}  // namespace

TEST_CASE("init_lff") {
  const auto a = init_lff<double>(LffVariant::conv1x1, 5, 32, 1.0, 3);
  const auto b = init_lff<double>(LffVariant::conv1x1, 5, 32, 1.0, 3);
  CHECK(a.weight == b.weight);
  CHECK(a.weight.rows() == 32);
  CHECK(a.weight.cols() == 1);
  CHECK(a.bias.isZero());

  const auto lin = init_lff<double>(LffVariant::linear, 4, 64, 1.0, 3);
  CHECK(lin.weight.rows() == 256);
  CHECK(lin.weight.cols() == 4);
  CHECK(lin.bias.size() == 256);

  const double sigma = 2.5;
  const auto big = init_lff<double>(LffVariant::linear, 40, 256, sigma, 9);  // 40960 weights
  const double n = static_cast<double>(big.weight.size());
  const double mean = big.weight.mean();
  CHECK(std::abs(mean) < 4.0 * sigma / 100.0);
  const double var = (big.weight.array() - mean).square().sum() / n;
  CHECK(std::abs(std::sqrt(var) - sigma) < 0.05);

  CHECK(init_lff<double>(LffVariant::conv1x1, 3, 32, 0.0, 1).weight.isZero());
  CHECK_THROWS_AS(init_lff<double>(LffVariant::conv1x1, 3, 48, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(init_lff<double>(LffVariant::conv1x1, 0, 32, 1.0, 1), ConfigError);
  CHECK(lff_variant_from_string(to_string(LffVariant::linear)) == LffVariant::linear);
}

TEST_CASE("lff_forward values") {
  auto p = init_lff<double>(LffVariant::conv1x1, 3, 32, 0.0, 1);
  const Rm x = random_rows(4, 3, 1);
  const Rm out = lff_forward(x, p);
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 3 * 64);
  for (Eigen::Index d = 0; d < 3; ++d) {
    CHECK((out.middleCols(d * 64, 32).array() == 1.0).all());
    CHECK((out.middleCols(d * 64 + 32, 32).array() == 0.0).all());
  }

  for (auto variant : {LffVariant::conv1x1, LffVariant::linear}) {
    auto q = init_lff<double>(variant, 3, 32, 3.0, 2);
    q.bias.setRandom();
    const Rm o1 = lff_forward(x, q);
    CHECK(o1.cwiseAbs().maxCoeff() <= 1.0);
    for (Eigen::Index d = 0; d < 3; ++d) {
      const auto c = o1.middleCols(d * 64, 32).array();
      const auto s = o1.middleCols(d * 64 + 32, 32).array();
      CHECK(((c.square() + s.square()) - 1.0).abs().maxCoeff() < 1e-12);
    }
    q.bias.array() += 2.0;  // z -> z + 2
    CHECK(lff_forward(x, q).isApprox(o1, 1e-12));
  }

  // Hand evaluation of one conv1x1 entry.
  auto r = init_lff<double>(LffVariant::conv1x1, 2, 32, 1.0, 4);
  r.bias(5) = 0.3;
  const Rm o = lff_forward(x.leftCols(2).eval(), r);
  const double z = r.weight(5, 0) * x(2, 1) + 0.3;
  CHECK(o(2, 64 + 5) == doctest::Approx(std::cos(M_PI * z)).epsilon(1e-14));
  CHECK(o(2, 64 + 32 + 5) == doctest::Approx(std::sin(M_PI * z)).epsilon(1e-14));
}

TEST_CASE("conv1x1 is feature-permutation equivariant, linear is not") {
  const Rm x = random_rows(3, 4, 5);
  Rm xp(3, 4);
  const int perm[4] = {2, 0, 3, 1};
  for (int j = 0; j < 4; ++j) xp.col(j) = x.col(perm[j]);

  const auto c = init_lff<double>(LffVariant::conv1x1, 4, 32, 1.0, 6);
  const Rm o = lff_forward(x, c), op = lff_forward(xp, c);
  for (int j = 0; j < 4; ++j) CHECK(op.middleCols(j * 64, 64) == o.middleCols(perm[j] * 64, 64));

  const auto l = init_lff<double>(LffVariant::linear, 4, 32, 1.0, 6);
  const Rm lo = lff_forward(x, l), lop = lff_forward(xp, l);
  bool equivariant = true;
  for (int j = 0; j < 4; ++j) equivariant = equivariant && lop.middleCols(j * 64, 64).isApprox(lo.middleCols(perm[j] * 64, 64));
  CHECK_FALSE(equivariant);
}

TEST_CASE("lff_backward finite differences") {
  for (auto variant : {LffVariant::conv1x1, LffVariant::linear}) {
    auto p = init_lff<double>(variant, 3, 4, 0.7, 7, false);
    p.bias.setRandom();
    Rm x = random_rows(5, 3, 8);
    const Rm g = random_rows(5, 3 * 8, 9);
    auto loss = [&]() { return (lff_forward(x, p).array() * g.array()).sum(); };

    LffCache<double> cache;
    lff_forward(x, p, &cache);
    const auto grads = lff_backward(g, cache, p);
    CHECK(gradcheck::max_rel_error(x, grads.input, loss) <= 1e-5);
    CHECK(gradcheck::max_rel_error(p.weight, grads.weight, loss) <= 1e-5);
    CHECK(gradcheck::max_rel_error(p.bias, grads.bias, loss) <= 1e-5);

    const auto zero = lff_backward(Rm(Rm::Zero(5, 24)), cache, p);
    CHECK(zero.weight.isZero());
    CHECK(zero.bias.isZero());
    CHECK_THROWS_AS(lff_backward(Rm(Rm::Zero(4, 24)), cache, p), ContractError);
  }

  // conv1x1 bias gradient sums dz over every row and feature.
  auto p = init_lff<double>(LffVariant::conv1x1, 2, 3, 1.0, 1, false);
  const Rm x = random_rows(4, 2, 2);
  const Rm g = random_rows(4, 12, 3);
  LffCache<double> cache;
  lff_forward(x, p, &cache);
  const auto grads = lff_backward(g, cache, p);
  for (Eigen::Index m = 0; m < 3; ++m) {
    double s = 0.0;
    for (Eigen::Index n = 0; n < 4; ++n)
      for (Eigen::Index d = 0; d < 2; ++d) {
        const double z = M_PI * cache.z(n, d * 3 + m);
        s += M_PI * (g(n, d * 6 + 3 + m) * std::cos(z) - g(n, d * 6 + m) * std::sin(z));
      }
    CHECK(grads.bias(m) == doctest::Approx(s).epsilon(1e-12));
  }
}
