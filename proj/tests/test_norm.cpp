#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "vn/error.hpp"
#include "vn/grad_check.hpp"
#include "vn/norm.hpp"

using namespace vn;
using oracle::random_tensor;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

// Population moments over an explicit index list.
Moments moments(const Tensor& t, const std::vector<std::size_t>& idx) {
  Moments m;
  for (auto i : idx) m.mean += t.data()[i];
  m.mean /= static_cast<double>(idx.size());
  for (auto i : idx) m.var += (t.data()[i] - m.mean) * (t.data()[i] - m.mean);
  m.var /= static_cast<double>(idx.size());
  return m;
}

std::size_t flat(const Shape& s, std::size_t n, std::size_t c, std::size_t i, std::size_t j) {
  return ((n * s.c + c) * s.h + i) * s.w + j;
}

std::vector<std::size_t> channel_indices(const Shape& s, std::size_t c) {
  std::vector<std::size_t> idx;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t i = 0; i < s.h; ++i)
      for (std::size_t j = 0; j < s.w; ++j) idx.push_back(flat(s, n, c, i, j));
  return idx;
}

std::vector<std::size_t> instance_indices(const Shape& s, std::size_t n, std::size_t c) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < s.h; ++i)
    for (std::size_t j = 0; j < s.w; ++j) idx.push_back(flat(s, n, c, i, j));
  return idx;
}

// Random affine so gradient checks exercise gamma and beta.
void randomize_affine(NormState& s, Rng& rng) {
  for (double& g : s.gamma.mutable_data()) g = 0.5 + rng.uniform();
  for (double& b : s.beta.mutable_data()) b = rng.uniform() - 0.5;
}

}  // namespace

TEST_CASE("batch norm training output is standardized per channel") {
  Rng rng(1);
  // Output variance is var/(var+eps); a spread of 20 keeps that within 1e-6.
  const Tensor x = random_tensor({4, 3, 5, 5}, rng, -10, 10);
  NormState s = NormState::make(NormKind::Batch, 3);
  const Tensor y = batch_norm(x, s, true);
  for (std::size_t c = 0; c < 3; ++c) {
    const Moments m = moments(y, channel_indices(y.shape(), c));
    CHECK(std::abs(m.mean) < 1e-8);
    CHECK(std::abs(m.var - 1.0) < 1e-6);  // eps shrinks it by ~eps/var
  }
}

TEST_CASE("batch norm of per-channel constants yields beta") {
  NormState s = NormState::make(NormKind::Batch, 2);
  s.beta.mutable_data()[0] = 0.25;
  s.beta.mutable_data()[1] = -4.0;
  std::vector<double> v(2 * 2 * 3 * 3);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (i / 9) % 2 == 0 ? 7.0 : -2.0;
  const Tensor y = batch_norm(Tensor::from({2, 2, 3, 3}, v), s, true);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 9; ++i) {
      CHECK(y.data()[(n * 2 + 0) * 9 + i] == 0.25);
      CHECK(y.data()[(n * 2 + 1) * 9 + i] == -4.0);
    }
}

TEST_CASE("batch norm running statistics follow the momentum recurrence") {
  Rng rng(2);
  NormState s = NormState::make(NormKind::Batch, 2);
  const Tensor b1 = random_tensor({2, 2, 3, 3}, rng, 0, 4);
  const Tensor b2 = random_tensor({3, 2, 2, 2}, rng, -2, 1);
  batch_norm(b1, s, true);
  batch_norm(b2, s, true);
  for (std::size_t c = 0; c < 2; ++c) {
    const Moments m1 = moments(b1, channel_indices(b1.shape(), c));
    const Moments m2 = moments(b2, channel_indices(b2.shape(), c));
    const double mean = 0.9 * (0.9 * 0.0 + 0.1 * m1.mean) + 0.1 * m2.mean;
    const double var = 0.9 * (0.9 * 1.0 + 0.1 * m1.var) + 0.1 * m2.var;
    CHECK(s.running_mean[c] == doctest::Approx(mean).epsilon(1e-13));
    CHECK(s.running_var[c] == doctest::Approx(var).epsilon(1e-13));
  }
  // Evaluation mode uses the running statistics.
  const Tensor e = batch_norm(b2, s, false);
  const double expect = (b2.data()[0] - s.running_mean[0]) / std::sqrt(s.running_var[0] + s.eps);
  CHECK(e.data()[0] == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("batch norm rejects a single value per channel in training") {
  NormState s = NormState::make(NormKind::Batch, 2);
  CHECK_THROWS_AS(batch_norm(Tensor::zeros({1, 2, 1, 1}), s, true), Error);
  CHECK_NOTHROW(batch_norm(Tensor::zeros({1, 2, 1, 1}), s, false));
  CHECK_THROWS_AS(batch_norm(Tensor::zeros({2, 3, 2, 2}), s, true), Error);
}

TEST_CASE("group norm with groups == channels equals instance norm") {
  Rng rng(3);
  const Tensor x = random_tensor({2, 4, 3, 3}, rng);
  NormState gn = NormState::make(NormKind::Group, 4, 4);
  NormState in = NormState::make(NormKind::Instance, 4);
  CHECK(oracle::max_abs_diff(group_norm(x, gn).data(), instance_norm(x, in).data()) < 1e-12);
}

TEST_CASE("group norm with a single group is per-sample layer normalization") {
  Rng rng(4);
  const Tensor x = random_tensor({3, 4, 2, 2}, rng, -1, 3);
  NormState gn = NormState::make(NormKind::Group, 4, 1);
  const Tensor y = group_norm(x, gn);
  for (std::size_t n = 0; n < 3; ++n) {
    std::vector<std::size_t> idx;
    for (std::size_t c = 0; c < 4; ++c) {
      const auto part = instance_indices(y.shape(), n, c);
      idx.insert(idx.end(), part.begin(), part.end());
    }
    CHECK(std::abs(moments(y, idx).mean) < 1e-12);
  }
}

TEST_CASE("group norm matches a group-loop oracle") {
  Rng rng(5);
  const Tensor x = random_tensor({2, 4, 3, 3}, rng);
  NormState gn = NormState::make(NormKind::Group, 4, 2);
  randomize_affine(gn, rng);
  const Tensor y = group_norm(x, gn);
  const Shape s = x.shape();
  double worst = 0.0;
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t g = 0; g < 2; ++g) {
      std::vector<std::size_t> idx;
      for (std::size_t c = 2 * g; c < 2 * g + 2; ++c) {
        const auto part = instance_indices(s, n, c);
        idx.insert(idx.end(), part.begin(), part.end());
      }
      const Moments m = moments(x, idx);
      for (std::size_t i : idx) {
        const std::size_t c = (i / 9) % 4;
        const double ref = gn.gamma.data()[c] * (x.data()[i] - m.mean) / std::sqrt(m.var + 1e-5) +
                           gn.beta.data()[c];
        worst = std::max(worst, std::abs(ref - y.data()[i]));
      }
    }
  CHECK(worst < 1e-12);
  NormState bad = NormState::make(NormKind::Group, 4, 2);
  bad.groups = 3;
  CHECK_THROWS_AS(group_norm(x, bad), Error);
  CHECK_THROWS_AS(NormState::make(NormKind::Group, 6, 4), Error);
}

TEST_CASE("batch norm on one sample equals instance norm and GN(groups=c)") {
  Rng rng(6);
  const Tensor x = random_tensor({1, 3, 4, 4}, rng);
  NormState bn = NormState::make(NormKind::Batch, 3);
  NormState in = NormState::make(NormKind::Instance, 3);
  NormState gn = NormState::make(NormKind::Group, 3, 3);
  const Tensor yb = batch_norm(x, bn, true);
  CHECK(oracle::max_abs_diff(yb.data(), instance_norm(x, in).data()) < 1e-10);
  CHECK(oracle::max_abs_diff(yb.data(), group_norm(x, gn).data()) < 1e-10);

  // With a single channel GN(groups=1) coincides with BN as well.
  const Tensor one = random_tensor({1, 1, 4, 4}, rng);
  NormState bn1 = NormState::make(NormKind::Batch, 1);
  NormState gn1 = NormState::make(NormKind::Group, 1, 1);
  CHECK(oracle::max_abs_diff(batch_norm(one, bn1, true).data(), group_norm(one, gn1).data()) < 1e-10);
}

TEST_CASE("instance norm statistics and invariances") {
  Rng rng(7);
  const Tensor x = random_tensor({2, 3, 4, 4}, rng, -2, 2);
  NormState in = NormState::make(NormKind::Instance, 3);
  const Tensor y = instance_norm(x, in);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c) {
      const Moments m = moments(y, instance_indices(y.shape(), n, c));
      CHECK(std::abs(m.mean) < 1e-8);
      CHECK(std::abs(m.var - 1.0) < 1e-3);  // eps-limited
    }

  // Per-sample constant offset.
  std::vector<double> shifted(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < 48; ++i) shifted[i] += 3.75;
  const Tensor ys = instance_norm(Tensor::from(x.shape(), shifted), in);
  CHECK(oracle::max_abs_diff(ys.data(), y.data()) < 1e-10);

  // Scaling sample 0 by 10: matches the eps-corrected closed form.
  std::vector<double> scaled(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < 48; ++i) scaled[i] *= 10.0;
  const Tensor yk = instance_norm(Tensor::from(x.shape(), scaled), in);
  double worst = 0.0, drift = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto idx = instance_indices(x.shape(), 0, c);
    const Moments m = moments(x, idx);
    for (std::size_t i : idx) {
      const double ref = 10.0 * (x.data()[i] - m.mean) / std::sqrt(100.0 * m.var + 1e-5);
      worst = std::max(worst, std::abs(yk.data()[i] - ref));
      drift = std::max(drift, std::abs(yk.data()[i] - y.data()[i]));
    }
  }
  CHECK(worst < 1e-8);
  CHECK(drift < 1e-4);  // only the eps term differs
  for (std::size_t i = 48; i < 96; ++i) CHECK(yk.data()[i] == y.data()[i]);

  // Identical in training and evaluation.
  CHECK(oracle::max_abs_diff(normalize(x, in, true).data(), normalize(x, in, false).data()) == 0.0);
  CHECK_THROWS_AS(instance_norm(Tensor::zeros({2, 3, 1, 1}), in), Error);
}

TEST_CASE("normalizers pass gradient checks through input and affine") {
  Rng rng(8);
  const Tensor x = random_tensor({2, 4, 3, 3}, rng);
  const Tensor proj = random_tensor({2, 4, 3, 3}, rng);
  auto project = [&](const Tensor& y) { return sum(mul(y, proj)); };
  for (NormKind kind : {NormKind::Batch, NormKind::Group, NormKind::Instance}) {
    NormState s = NormState::make(kind, 4, 2);
    randomize_affine(s, rng);
    Tensor xi = x.detach_copy();
    const double err = grad_check([&] { return project(normalize(xi, s, true)); },
                                  {xi, s.gamma, s.beta});
    CAPTURE(to_string(kind));
    CHECK(err < 1e-5);
  }
  NormState bn = NormState::make(NormKind::Batch, 4);
  batch_norm(x, bn, true);
  Tensor xe = x.detach_copy();
  CHECK(grad_check([&] { return project(batch_norm(xe, bn, false)); }, {xe, bn.gamma, bn.beta}) < 1e-5);
}
