// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace pedpipe::testing {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi, bool requires_grad) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return Tensor::from(shape, std::move(v), requires_grad);
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-4});
}

double max_gradient_error(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves, double h) {
  for (Tensor t : leaves) t.zero_grad();
  f().backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& t : leaves) {
    if (t.has_grad())
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    else
      analytic.emplace_back(t.numel(), 0.0);
  }
  double worst = 0.0;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Tensor leaf = leaves[k];
    auto values = leaf.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f().item();
      values[i] = saved - h;
      const double down = f().item();
      values[i] = saved;
      worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

namespace {

std::vector<Words> grams(const Words& w, std::size_t n) {
  std::vector<Words> out;
  for (std::size_t i = 0; i + n <= w.size(); ++i) out.emplace_back(w.begin() + i, w.begin() + i + n);
  return out;
}

// Clipped matches by pairing each candidate gram with an unused equal
// reference gram.
std::size_t clipped_matches(const std::vector<Words>& c, const std::vector<Words>& r) {
  std::vector<bool> used(r.size(), false);
  std::size_t m = 0;
  for (const auto& g : c) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!used[j] && r[j] == g) {
        used[j] = true;
        ++m;
        break;
      }
    }
  }
  return m;
}

double f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

double oracle_rouge_n(const Words& cand, const Words& ref, std::size_t n) {
  const auto c = grams(cand, n), r = grams(ref, n);
  if (c.empty() || r.empty()) return 0.0;
  const double m = static_cast<double>(clipped_matches(c, r));
  return 100.0 * f1(m / c.size(), m / r.size());
}

double oracle_rouge_l(const Words& cand, const Words& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::vector<std::vector<std::size_t>> t(cand.size() + 1, std::vector<std::size_t>(ref.size() + 1, 0));
  for (std::size_t i = cand.size(); i-- > 0;)
    for (std::size_t j = ref.size(); j-- > 0;)
      t[i][j] = cand[i] == ref[j] ? t[i + 1][j + 1] + 1 : std::max(t[i + 1][j], t[i][j + 1]);
  const double l = static_cast<double>(t[0][0]);
  return 100.0 * f1(l / cand.size(), l / ref.size());
}

double oracle_bleu(const Words& cand, const Words& ref, std::size_t n) {
  if (cand.empty() || ref.empty()) return 0.0;
  const std::size_t order = std::min(n, cand.size());
  double log_sum = 0.0;
  for (std::size_t k = 1; k <= order; ++k) {
    const auto c = grams(cand, k), r = grams(ref, k);
    const double p = static_cast<double>(clipped_matches(c, r)) / c.size();
    log_sum += std::log(std::max(p, 1e-9));
  }
  const double c = cand.size(), r = ref.size();
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return 100.0 * bp * std::exp(log_sum / order);
}

double oracle_gleu(const Words& cand, const Words& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::size_t m = 0, nc = 0, nr = 0;
  for (std::size_t k = 1; k <= 4; ++k) {
    const auto c = grams(cand, k), r = grams(ref, k);
    m += clipped_matches(c, r);
    nc += c.size();
    nr += r.size();
  }
  if (nc == 0 || nr == 0) return 0.0;
  return 100.0 * std::min(static_cast<double>(m) / nc, static_cast<double>(m) / nr);
}

double oracle_distinct(const std::vector<Words>& cands, std::size_t n) {
  std::vector<Words> seen;
  std::size_t total = 0;
  for (const auto& c : cands) {
    for (auto& g : grams(c, n)) {
      ++total;
      if (std::find(seen.begin(), seen.end(), g) == seen.end()) seen.push_back(std::move(g));
    }
  }
  return total == 0 ? 0.0 : 100.0 * seen.size() / total;
}

}  // namespace pedpipe::testing
