#include "pwabs/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pwabs/error.hpp"
#include "pwabs/rng.hpp"

namespace pwabs {

void IdentConfig::validate() const {
  if (!(r > 0.0 && r < 1.0)) throw ConfigError("ident.r must lie in (0, 1)");
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("ident.theta must lie in (0, 1)");
  if (J < 1) throw ConfigError("ident.J must be >= 1");
  if (!(beta >= 0.0) || !(mu >= 0.0) || !(kappa >= 0.0)) throw ConfigError("ident.beta, mu, kappa must be >= 0");
  if (max_iterations < 1) throw ConfigError("ident.max_iterations must be >= 1");
  if (svm_iterations < 1 || !(svm_lambda > 0.0)) throw ConfigError("ident svm settings must be positive");
}

std::vector<int> IdentResult::labels(std::size_t n) const {
  std::vector<int> out(n, -1);
  for (std::size_t i = 0; i < clusters.size(); ++i)
    for (int k : clusters[i]) out[static_cast<std::size_t>(k)] = static_cast<int>(i);
  for (int k : discarded) out[static_cast<std::size_t>(k)] = -2;
  return out;
}

namespace {

Mat regressor(const Dataset& data, std::span<const int> idx) {
  const int n = data.dim();
  Mat Z(static_cast<Eigen::Index>(idx.size()), n + 1);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    Z.row(static_cast<Eigen::Index>(r)).head(n) = data.xs[static_cast<std::size_t>(idx[r])].transpose();
    Z(static_cast<Eigen::Index>(r), n) = 1.0;
  }
  return Z;
}

Mat targets(const Dataset& data, std::span<const int> idx) {
  Mat Y(static_cast<Eigen::Index>(idx.size()), data.dim());
  for (std::size_t r = 0; r < idx.size(); ++r)
    Y.row(static_cast<Eigen::Index>(r)) = data.ys[static_cast<std::size_t>(idx[r])].transpose();
  return Y;
}

AffineFit unpack(const Mat& theta, int n) {
  return AffineFit{theta.topRows(n).transpose(), theta.row(n).transpose()};
}

double residual(const AffineFit& f, const Vec& x, const Vec& y) { return (y - f.A * x - f.b).norm(); }

std::vector<AffineFit> fits_of(const PwaModel& model) {
  std::vector<AffineFit> out;
  for (const auto& m : model.modes()) out.push_back(AffineFit{m.A, m.b});
  return out;
}

std::vector<int> labels_of(const std::vector<std::vector<int>>& clusters, std::size_t n) {
  std::vector<int> out(n, -1);
  for (std::size_t i = 0; i < clusters.size(); ++i)
    for (int k : clusters[i]) out[static_cast<std::size_t>(k)] = static_cast<int>(i);
  return out;
}

std::vector<std::vector<int>> clusters_of(const std::vector<int>& labels, int s) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(s));
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k] >= 0) out[static_cast<std::size_t>(labels[k])].push_back(static_cast<int>(k));
  return out;
}

/// Neighbourhood vote in the joint (x, y) ball: mode with most labelled
/// neighbours, lowest index on ties, -1 when the ball is empty.
int neighbour_vote(const Dataset& data, const std::vector<int>& labels, int s, std::size_t k, double radius) {
  std::vector<int> count(static_cast<std::size_t>(s), 0);
  int total = 0;
  const double r2 = radius * radius;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (j == k || labels[j] < 0) continue;
    const double d2 = (data.xs[j] - data.xs[k]).squaredNorm() + (data.ys[j] - data.ys[k]).squaredNorm();
    if (d2 <= r2) {
      ++count[static_cast<std::size_t>(labels[j])];
      ++total;
    }
  }
  if (total == 0) return -1;
  return static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
}

std::vector<int> consistent_modes(const std::vector<AffineFit>& fits, const Vec& x, const Vec& y, double sigma_hat) {
  std::vector<int> out;
  for (std::size_t i = 0; i < fits.size(); ++i)
    if (residual(fits[i], x, y) <= sigma_hat) out.push_back(static_cast<int>(i));
  return out;
}

PwaModel assemble(const std::vector<AffineFit>& fits, const std::vector<Polytope>& regions, const Polytope& domain,
                  double noise) {
  std::vector<PwaMode> modes;
  for (std::size_t i = 0; i < fits.size(); ++i) modes.push_back(PwaMode{fits[i].A, fits[i].b, regions[i]});
  return PwaModel(std::move(modes), domain, noise);
}

std::vector<Polytope> regions_for(const Dataset& data, const std::vector<std::vector<int>>& clusters,
                                  const Polytope& domain, const IdentConfig& cfg, std::vector<std::string>* warnings) {
  if (clusters.size() < 2) return std::vector<Polytope>(clusters.size(), domain);
  return fit_boundaries(data, clusters, domain, cfg, warnings);
}

}  // namespace

AffineFit fit_affine(const Dataset& data, std::span<const int> indices) {
  const int n = data.dim();
  if (indices.size() < static_cast<std::size_t>(n + 1))
    throw DegenerateCluster("fit_affine: need at least N+1 samples");
  const Mat Z = regressor(data, indices);
  Eigen::ColPivHouseholderQR<Mat> qr(Z);
  qr.setThreshold(1e-10);
  if (qr.rank() < n + 1) throw DegenerateCluster("fit_affine: regressor is rank deficient");
  return unpack(qr.solve(targets(data, indices)), n);
}

double estimate_noise_std(const Dataset& data) {
  const int n = data.dim();
  const std::size_t count = data.size();
  if (count < static_cast<std::size_t>(n + 2)) return 0.0;
  const std::size_t k = std::min(count, static_cast<std::size_t>(std::max(3 * (n + 1), n + 3)));
  std::vector<double> local;
  std::vector<int> order(count);
  std::vector<double> d2(count);
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t j = 0; j < count; ++j) d2[j] = (data.xs[j] - data.xs[p]).squaredNorm();
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](int a, int b) { return d2[static_cast<std::size_t>(a)] < d2[static_cast<std::size_t>(b)]; });
    const std::span<const int> nb(order.data(), k);
    const Mat Z = regressor(data, nb);
    Eigen::ColPivHouseholderQR<Mat> qr(Z);
    qr.setThreshold(1e-10);
    if (qr.rank() < n + 1) continue;
    const Mat Y = targets(data, nb);
    const double rss = (Y - Z * qr.solve(Y)).squaredNorm();
    const double dof = static_cast<double>(k) - (n + 1);
    local.push_back(std::sqrt(rss / (dof * n)));
  }
  if (local.empty()) return 0.0;
  auto mid = local.begin() + static_cast<std::ptrdiff_t>(local.size() / 2);
  std::nth_element(local.begin(), mid, local.end());
  return *mid;
}

IdentConfig resolve_config(const IdentConfig& cfg, const Dataset& data, const Polytope& domain) {
  IdentConfig out = cfg;
  if (!(out.sigma_hat > 0.0)) {
    double ymax = 0.0;
    for (const auto& y : data.ys) ymax = std::max(ymax, y.cwiseAbs().maxCoeff());
    out.sigma_hat = std::max(3.0 * estimate_noise_std(data), 1e-6 * (1.0 + ymax));
  }
  if (!(out.ball_radius > 0.0)) out.ball_radius = 0.1 * bounding_box(domain).diameter();
  return out;
}

// ---------------------------------------------------------------- initialization

IdentResult init_identify(const Dataset& data, const Polytope& domain, const IdentConfig& config) {
  config.validate();
  const int n = data.dim();
  const std::size_t K = data.size();
  if (K < static_cast<std::size_t>(2 * (n + 1))) throw PreconditionViolation("init_identify: need at least 2(N+1) samples");
  if (domain.dim() != n) throw DimensionMismatch("init_identify: data and domain dimensions differ");
  const IdentConfig cfg = resolve_config(config, data, domain);

  IdentResult res;
  res.diag.sigma_hat = cfg.sigma_hat;
  res.diag.ball_radius = cfg.ball_radius;

  Vec ylo = data.ys.front(), yhi = data.ys.front();
  for (const auto& y : data.ys) {
    ylo = ylo.cwiseMin(y);
    yhi = yhi.cwiseMax(y);
  }

  std::vector<int> remaining(K);
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<AffineFit> fits;
  Rng rng(mix_seed(cfg.seed, 0xa1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto inliers_of = [&](const AffineFit& f) {
    std::vector<int> out;
    for (int k : remaining)
      if (residual(f, data.xs[static_cast<std::size_t>(k)], data.ys[static_cast<std::size_t>(k)]) <= cfg.sigma_hat)
        out.push_back(k);
    return out;
  };

  while (static_cast<double>(remaining.size()) >= cfg.r * static_cast<double>(K) &&
         remaining.size() >= static_cast<std::size_t>(n + 1)) {
    ++res.diag.peel_rounds;
    std::size_t best_count = 0;
    AffineFit best;
    for (int j = 0; j < cfg.J; ++j) {
      AffineFit cand;
      if (cfg.candidate_mode == CandidateMode::MinimalSubset) {
        std::vector<int> pick;
        while (pick.size() < static_cast<std::size_t>(n + 1)) {
          std::uniform_int_distribution<std::size_t> any(0, remaining.size() - 1);
          const int k = remaining[any(rng)];
          if (std::find(pick.begin(), pick.end(), k) == pick.end()) pick.push_back(k);
        }
        const Mat Z = regressor(data, pick);
        Eigen::FullPivLU<Mat> lu(Z);
        if (!lu.isInvertible() || lu.rcond() < 1e-10) continue;
        cand = unpack(lu.solve(targets(data, pick)), n);
      } else {
        cand.A = Mat(n, n);
        cand.b = Vec(n);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < n; ++c) cand.A(r, c) = -2.0 + 4.0 * unit(rng);
        for (int r = 0; r < n; ++r) cand.b(r) = ylo(r) + (yhi(r) - ylo(r)) * unit(rng);
      }
      std::size_t hits = 0;
      for (int k : remaining)
        if (residual(cand, data.xs[static_cast<std::size_t>(k)], data.ys[static_cast<std::size_t>(k)]) <=
            cfg.sigma_hat)
          ++hits;
      if (hits > best_count) {
        best_count = hits;
        best = std::move(cand);
      }
    }
    if (best_count < static_cast<std::size_t>(n + 1)) {
      if (fits.empty())
        throw ThresholdTooTight("init_identify: no candidate explains N+1 samples; raise sigma_hat");
      res.diag.warnings.push_back("peeling stopped: no candidate with N+1 inliers among the remaining samples");
      break;
    }
    std::vector<int> peel = inliers_of(best);
    try {
      const AffineFit refit = fit_affine(data, peel);
      std::vector<int> again = inliers_of(refit);
      if (again.size() >= static_cast<std::size_t>(n + 1)) peel = std::move(again);
    } catch (const DegenerateCluster&) {
    }
    try {
      fits.push_back(fit_affine(data, peel));
    } catch (const DegenerateCluster&) {
      fits.push_back(best);
    }
    res.clusters.push_back(peel);
    std::vector<int> rest;
    std::set_difference(remaining.begin(), remaining.end(), peel.begin(), peel.end(), std::back_inserter(rest));
    remaining = std::move(rest);
  }
  res.unassigned = remaining;

  const auto regions = regions_for(data, res.clusters, domain, cfg, &res.diag.warnings);
  res.model = assemble(fits, regions, domain, cfg.sigma_hat / 3.0);
  res.residual = mean_cost(data, res.model, res.clusters);
  return res;
}

// ---------------------------------------------------------------- boundaries

std::vector<Polytope> fit_boundaries(const Dataset& data, const std::vector<std::vector<int>>& clusters,
                                     const Polytope& domain, const IdentConfig& cfg,
                                     std::vector<std::string>* warnings) {
  const std::size_t s = clusters.size();
  if (s < 2) throw PreconditionViolation("fit_boundaries: need at least two clusters");
  for (const auto& c : clusters)
    if (c.empty()) throw PreconditionViolation("fit_boundaries: empty cluster");
  const int n = data.dim();
  std::vector<Polytope> regions(s, domain);

  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i + 1; j < s; ++j) {
      std::vector<int> idx(clusters[i]);
      idx.insert(idx.end(), clusters[j].begin(), clusters[j].end());
      const std::size_t m = idx.size();
      Vec mean = Vec::Zero(n), ci = Vec::Zero(n), cj = Vec::Zero(n);
      for (int k : clusters[i]) ci += data.xs[static_cast<std::size_t>(k)];
      for (int k : clusters[j]) cj += data.xs[static_cast<std::size_t>(k)];
      ci /= static_cast<double>(clusters[i].size());
      cj /= static_cast<double>(clusters[j].size());
      for (int k : idx) mean += data.xs[static_cast<std::size_t>(k)];
      mean /= static_cast<double>(m);
      Vec scale = Vec::Zero(n);
      for (int k : idx) scale += (data.xs[static_cast<std::size_t>(k)] - mean).cwiseAbs2();
      scale = (scale / static_cast<double>(m)).cwiseSqrt().cwiseMax(1e-12);

      std::vector<Vec> z(m);
      std::vector<double> label(m);
      for (std::size_t t = 0; t < m; ++t) {
        z[t] = (data.xs[static_cast<std::size_t>(idx[t])] - mean).cwiseQuotient(scale);
        label[t] = t < clusters[i].size() ? -1.0 : 1.0;
      }

      // Soft-margin hinge loss by full-batch subgradient descent, best iterate kept.
      Vec w = Vec::Zero(n);
      double c = 0.0;
      auto objective = [&](const Vec& wv, double cv) {
        double loss = 0.0;
        for (std::size_t t = 0; t < m; ++t) loss += std::max(0.0, 1.0 - label[t] * (wv.dot(z[t]) + cv));
        return 0.5 * cfg.svm_lambda * wv.squaredNorm() + loss / static_cast<double>(m);
      };
      Vec best_w = w;
      double best_c = c;
      double best_obj = objective(w, c);
      for (int it = 1; it <= cfg.svm_iterations; ++it) {
        Vec gw = cfg.svm_lambda * w;
        double gc = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
          if (label[t] * (w.dot(z[t]) + c) < 1.0) {
            gw -= label[t] * z[t] / static_cast<double>(m);
            gc -= label[t] / static_cast<double>(m);
          }
        }
        const double step = 1.0 / std::sqrt(static_cast<double>(it));
        w -= step * gw;
        c -= step * gc;
        const double obj = objective(w, c);
        if (obj < best_obj) {
          best_obj = obj;
          best_w = w;
          best_c = c;
        }
      }

      Vec h;
      double k;
      const bool same_centroid = (cj - ci).norm() < 1e-12;
      if (best_w.norm() < 1e-12 || same_centroid) {
        if (warnings) warnings->push_back("clusters " + std::to_string(i) + " and " + std::to_string(j) +
                                          " are not separable; using the centroid bisector");
        h = same_centroid ? Vec(Vec::Unit(n, 0)) : Vec((cj - ci).normalized());
        k = h.dot(0.5 * (ci + cj));
      } else {
        // Back to raw coordinates, then place the offset mid-way through the
        // threshold interval with fewest misclassifications.
        const Vec wr = best_w.cwiseQuotient(scale);
        const double svm_thr = wr.dot(mean) - best_c;
        std::vector<std::pair<double, double>> proj(m);
        for (std::size_t t = 0; t < m; ++t) proj[t] = {wr.dot(data.xs[static_cast<std::size_t>(idx[t])]), label[t]};
        std::sort(proj.begin(), proj.end());
        // errors with threshold below everything: all i-points misclassified.
        int errors = static_cast<int>(clusters[i].size());
        int best_err = errors;
        std::vector<std::pair<double, double>> intervals;
        auto consider = [&](int e, double lo, double hi) {
          if (e < best_err) {
            best_err = e;
            intervals.clear();
          }
          if (e == best_err) intervals.emplace_back(lo, hi);
        };
        consider(errors, -std::numeric_limits<double>::infinity(), proj.front().first);
        for (std::size_t t = 0; t < m; ++t) {
          errors += proj[t].second < 0 ? -1 : 1;
          const double hi = t + 1 < m ? proj[t + 1].first : std::numeric_limits<double>::infinity();
          if (t + 1 < m && hi == proj[t].first) continue;
          consider(errors, proj[t].first, hi);
        }
        double thr = svm_thr;
        double best_gap = std::numeric_limits<double>::infinity();
        for (const auto& [lo, hi] : intervals) {
          const double gap = svm_thr < lo ? lo - svm_thr : (svm_thr > hi ? svm_thr - hi : 0.0);
          if (gap < best_gap) {
            best_gap = gap;
            if (std::isfinite(lo) && std::isfinite(hi)) thr = 0.5 * (lo + hi);
            else thr = std::isfinite(lo) ? std::max(lo, svm_thr) : std::min(hi, svm_thr);
          }
        }
        const double norm = wr.norm();
        h = wr / norm;
        k = thr / norm;
      }
      regions[i] = regions[i].with_halfspace(h, k);
      regions[j] = regions[j].with_halfspace(-h, -k);
    }
  }
  return regions;
}

// ---------------------------------------------------------------- refinement steps

std::vector<std::vector<int>> reassign_undecidable(const Dataset& data, const PwaModel& model,
                                                   std::vector<std::vector<int>> clusters, const IdentConfig& cfg,
                                                   IdentDiagnostics* diag) {
  if (!(cfg.sigma_hat > 0.0) || !(cfg.ball_radius > 0.0))
    throw PreconditionViolation("reassign_undecidable: sigma_hat and ball_radius must be resolved");
  const int s = model.mode_count();
  if (static_cast<int>(clusters.size()) != s) throw PreconditionViolation("reassign_undecidable: cluster count mismatch");
  const auto fits = fits_of(model);
  const auto before = labels_of(clusters, data.size());
  auto after = before;
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (before[k] < 0) continue;
    if (consistent_modes(fits, data.xs[k], data.ys[k], cfg.sigma_hat).size() < 2) continue;
    const int vote = neighbour_vote(data, before, s, k, cfg.ball_radius);
    if (vote < 0) {
      if (diag) ++diag->no_neighbours;
      continue;
    }
    if (vote != before[k] && diag) ++diag->reassigned;
    after[k] = vote;
  }
  return clusters_of(after, s);
}

double distance_to_polytope(const Polytope& P, const Vec& x) {
  if (P.contains_closed(x, 0.0)) return 0.0;
  // Dykstra's alternating projections onto the closed halfspaces.
  const int m = P.rows();
  Vec cur = x;
  std::vector<Vec> incr(static_cast<std::size_t>(m), Vec::Zero(x.size()));
  for (int sweep = 0; sweep < 2000; ++sweep) {
    const Vec start = cur;
    for (int r = 0; r < m; ++r) {
      const Vec h = P.H().row(r).transpose();
      const double hn = h.squaredNorm();
      const Vec v = cur + incr[static_cast<std::size_t>(r)];
      const double excess = h.dot(v) - P.K()(r);
      const Vec proj = (excess > 0.0 && hn > 0.0) ? Vec(v - (excess / hn) * h) : v;
      incr[static_cast<std::size_t>(r)] = v - proj;
      cur = proj;
    }
    if ((cur - start).norm() < 1e-13) break;
  }
  return (cur - x).norm();
}

PruneResult prune_unfeasible(const Dataset& data, const PwaModel& model, std::vector<std::vector<int>> clusters,
                             std::vector<int> unassigned, const FiniteTS* ts, const IdentConfig& cfg,
                             IdentDiagnostics* diag) {
  PruneResult out;
  if (!ts) {
    out.clusters = std::move(clusters);
    out.unassigned = std::move(unassigned);
    return out;
  }
  if (!(cfg.sigma_hat > 0.0) || !(cfg.ball_radius > 0.0))
    throw PreconditionViolation("prune_unfeasible: sigma_hat and ball_radius must be resolved");
  const int s = model.mode_count();
  const auto fits = fits_of(model);
  auto labels = labels_of(clusters, data.size());
  std::vector<int> candidates = unassigned;
  for (std::size_t k = 0; k < data.size(); ++k)
    if (labels[k] >= 0 && consistent_modes(fits, data.xs[k], data.ys[k], cfg.sigma_hat).empty()) {
      candidates.push_back(static_cast<int>(k));
      labels[k] = -1;
    }
  std::sort(candidates.begin(), candidates.end());
  const auto snapshot = labels;

  for (int k : candidates) {
    const auto& x = data.xs[static_cast<std::size_t>(k)];
    const auto& y = data.ys[static_cast<std::size_t>(k)];
    const int q = ts->state_of(x);
    if (q < 0) {
      if (diag) ++diag->outside_abstraction;
      out.discarded.push_back(k);
      continue;
    }
    double dist = std::numeric_limits<double>::infinity();
    for (int q2 : ts->succ[static_cast<std::size_t>(q)])
      for (const auto& p : ts->states[static_cast<std::size_t>(q2)].region.pieces())
        dist = std::min(dist, distance_to_polytope(p, y));
    if (dist >= cfg.sigma_hat) {
      out.discarded.push_back(k);
      continue;
    }
    const int vote = s > 0 ? neighbour_vote(data, snapshot, s, static_cast<std::size_t>(k), cfg.ball_radius) : -1;
    if (vote < 0) {
      if (diag) ++diag->no_neighbours;
      out.unassigned.push_back(k);
      continue;
    }
    if (diag) ++diag->reassigned;
    labels[static_cast<std::size_t>(k)] = vote;
  }
  out.clusters = clusters_of(labels, s);
  return out;
}

// ---------------------------------------------------------------- refinement

IdentResult refine_identify(const Dataset& data, IdentResult init, const FiniteTS* ts, const IdentConfig& config) {
  config.validate();
  IdentConfig cfg = config;
  if (!(cfg.sigma_hat > 0.0)) cfg.sigma_hat = init.diag.sigma_hat;
  if (!(cfg.ball_radius > 0.0)) cfg.ball_radius = init.diag.ball_radius;
  cfg = resolve_config(cfg, data, init.model.domain());

  const int n = data.dim();
  const Polytope domain = init.model.domain();
  IdentResult res = std::move(init);
  res.diag.sigma_hat = cfg.sigma_hat;
  res.diag.ball_radius = cfg.ball_radius;
  std::vector<AffineFit> fits = fits_of(res.model);
  if (fits.empty()) throw IdentificationCollapse("refine_identify: no modes to refine");

  std::vector<bool> dropped(data.size(), false);
  for (int k : res.discarded) dropped[static_cast<std::size_t>(k)] = true;

  // Consistent-with-one samples go to that mode; samples consistent with none
  // become unassigned; samples consistent with several keep a consistent
  // label or take the best-fitting one, then the vote settles them.
  auto assign = [&](PwaModel& model) {
    const int s = static_cast<int>(fits.size());
    auto labels = labels_of(res.clusters, data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
      if (dropped[k]) {
        labels[k] = -2;
        continue;
      }
      const auto ok = consistent_modes(fits, data.xs[k], data.ys[k], cfg.sigma_hat);
      if (ok.empty()) {
        labels[k] = -1;
      } else if (ok.size() == 1) {
        labels[k] = ok.front();
      } else if (std::find(ok.begin(), ok.end(), labels[k]) == ok.end()) {
        int best = ok.front();
        for (int i : ok)
          if (residual(fits[static_cast<std::size_t>(i)], data.xs[k], data.ys[k]) <
              residual(fits[static_cast<std::size_t>(best)], data.xs[k], data.ys[k]))
            best = i;
        labels[k] = best;
      }
    }
    res.clusters = clusters_of(labels, s);
    res.unassigned.clear();
    for (std::size_t k = 0; k < data.size(); ++k)
      if (labels[k] == -1) res.unassigned.push_back(static_cast<int>(k));
    res.clusters = reassign_undecidable(data, model, std::move(res.clusters), cfg, &res.diag);
    auto pr = prune_unfeasible(data, model, std::move(res.clusters), std::move(res.unassigned), ts, cfg, &res.diag);
    res.clusters = std::move(pr.clusters);
    res.unassigned = std::move(pr.unassigned);
    for (int k : pr.discarded) {
      dropped[static_cast<std::size_t>(k)] = true;
      res.discarded.push_back(k);
    }
    std::sort(res.discarded.begin(), res.discarded.end());
  };

  auto provisional = [&]() {
    return assemble(fits, std::vector<Polytope>(fits.size(), domain), domain, res.model.noise_sigma());
  };

  for (int l = 1; l <= cfg.max_iterations; ++l) {
    res.diag.iterations = l;
    const double decay = std::pow(cfg.theta, l);
    const auto old = fits;
    bool structural = false;

    if (fits.size() >= 2) {
      std::size_t bi = 0, bj = 1;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < fits.size(); ++i)
        for (std::size_t j = i + 1; j < fits.size(); ++j) {
          const double d = (fits[i].A - fits[j].A).norm();
          if (d < bd) {
            bd = d;
            bi = i;
            bj = j;
          }
        }
      if (bd <= decay * cfg.beta) {
        auto& merged = res.clusters[bi];
        merged.insert(merged.end(), res.clusters[bj].begin(), res.clusters[bj].end());
        std::sort(merged.begin(), merged.end());
        try {
          fits[bi] = fit_affine(data, merged);
        } catch (const DegenerateCluster&) {
        }
        res.clusters.erase(res.clusters.begin() + static_cast<std::ptrdiff_t>(bj));
        fits.erase(fits.begin() + static_cast<std::ptrdiff_t>(bj));
        ++res.diag.merges;
        structural = true;
      }
    }

    PwaModel model = provisional();
    assign(model);

    // Small-mode discard: the smallest mode goes when its share is at most
    // theta^l mu; modes too small to refit always go.
    bool first = true;
    for (;;) {
      if (fits.empty()) break;
      std::size_t retained = data.size() - res.discarded.size();
      std::size_t smallest = 0;
      for (std::size_t i = 1; i < res.clusters.size(); ++i)
        if (res.clusters[i].size() < res.clusters[smallest].size()) smallest = i;
      const double share = retained ? static_cast<double>(res.clusters[smallest].size()) / static_cast<double>(retained) : 0.0;
      const bool tiny = res.clusters[smallest].size() < static_cast<std::size_t>(n + 1);
      if (!tiny && !(first && share <= decay * cfg.mu)) break;
      first = false;
      res.clusters.erase(res.clusters.begin() + static_cast<std::ptrdiff_t>(smallest));
      fits.erase(fits.begin() + static_cast<std::ptrdiff_t>(smallest));
      ++res.diag.mode_discards;
      structural = true;
      if (fits.empty()) break;
      model = provisional();
      assign(model);
    }
    if (fits.empty()) throw IdentificationCollapse("refine_identify: every mode was merged or discarded");

    for (std::size_t i = 0; i < fits.size(); ++i) {
      try {
        fits[i] = fit_affine(data, res.clusters[i]);
      } catch (const DegenerateCluster&) {
        res.diag.warnings.push_back("mode " + std::to_string(i) + " kept its previous law (degenerate refit)");
      }
    }

    double delta = std::numeric_limits<double>::infinity();
    if (!structural && fits.size() == old.size()) {
      delta = 0.0;
      for (std::size_t i = 0; i < fits.size(); ++i) delta = std::max(delta, (fits[i].A - old[i].A).norm());
    }
    if (delta <= cfg.kappa) break;
  }

  const auto regions = regions_for(data, res.clusters, domain, cfg, &res.diag.warnings);
  res.model = assemble(fits, regions, domain, res.model.noise_sigma());
  res.residual = mean_cost(data, res.model, res.clusters);
  return res;
}

double mean_cost(const Dataset& data, const PwaModel& model, const std::vector<std::vector<int>>& clusters) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& m = model.mode(static_cast<int>(i));
    for (int k : clusters[i]) {
      total += (data.ys[static_cast<std::size_t>(k)] - m.A * data.xs[static_cast<std::size_t>(k)] - m.b).squaredNorm();
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace pwabs
