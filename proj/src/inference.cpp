#include "micropart/inference.hpp"

#include <omp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <variant>

#include "micropart/errors.hpp"
#include "micropart/special.hpp"

namespace micropart {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// standardized truncated normal on (-1, inf): the proposal is
// TN(tau_prev + s, s^2) restricted to (tau_prev, inf), so the standardized
// lower bound is always -1
const double kPhiAtMinus1 = special::norm_cdf(-1.0);
const double kTailMass = 1.0 - kPhiAtMinus1;
const double kLogTailMass = std::log(kTailMass);
const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);

// ---------------------------------------------------------------------------
// shared pieces of both engines

struct WeightLedger {
  std::vector<double> log_w;  // normalized: logsumexp = 0
  std::vector<double> w;      // scratch: exp(log_w) after each step
  std::vector<double> incr;
  std::vector<double> trace;
  double log_z = 0.0;
  double ess_value = 0.0;

  void init(std::size_t n) {
    log_w.assign(n, -std::log(static_cast<double>(n)));
    w.assign(n, 1.0 / static_cast<double>(n));
    incr.assign(n, 0.0);
    ess_value = static_cast<double>(n);
  }

  // returns true when the ESS dropped below threshold * N
  bool absorb_increments(double ess_threshold, std::size_t step_idx) {
    const std::size_t n = log_w.size();
    double max_lw = kNegInf;
    for (std::size_t p = 0; p < n; ++p) {
      log_w[p] += incr[p];
      max_lw = std::max(max_lw, log_w[p]);
    }
    if (!(max_lw > kNegInf))
      throw degeneracy_error("SMC degenerate: all particle weights vanished at step " +
                                 std::to_string(step_idx + 1),
                             step_idx + 1);
    double sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      w[p] = std::exp(log_w[p] - max_lw);
      sum += w[p];
    }
    const double log_norm = max_lw + std::log(sum);
    log_z += log_norm;
    const double inv_sum = 1.0 / sum;
    double sum_sq = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      log_w[p] -= log_norm;
      w[p] *= inv_sum;
      sum_sq += w[p] * w[p];
    }
    ess_value = 1.0 / sum_sq;
    trace.push_back(ess_value);
    return ess_value < ess_threshold * static_cast<double>(n);
  }

  // systematic resampling ancestor indices from the normalized weights
  std::vector<std::size_t> systematic_ancestors(double u0) const {
    const std::size_t n = log_w.size();
    std::vector<std::size_t> ancestors(n);
    double cum = 0.0;
    std::size_t p = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double target = (static_cast<double>(k) + u0) / static_cast<double>(n);
      while (cum + w[p] < target && p + 1 < n) {
        cum += w[p];
        ++p;
      }
      ancestors[k] = p;
    }
    return ancestors;
  }

  void reset_uniform() {
    const auto n = static_cast<double>(log_w.size());
    std::fill(log_w.begin(), log_w.end(), -std::log(n));
    std::fill(w.begin(), w.end(), 1.0 / n);
  }
};

// truncated-normal draw and its log density; consumes one uniform
struct TnDraw {
  double tau;
  double log_q;
};

inline TnDraw propose_arrival(double tau_prev, double scale, double log_scale, double u) {
  const double z = special::norm_ppf(kPhiAtMinus1 + u * kTailMass);
  const double tau = tau_prev + scale * (1.0 + z);
  const double log_q = -0.5 * z * z - log_scale - kHalfLog2Pi - kLogTailMass;
  return {tau, log_q};
}

// ---------------------------------------------------------------------------
// reference engine: one exact-log potential object per particle

struct RefParticle {
  double tau_prev = 0.0;
  double psi_prev = 0.0;
  ClusterPotentialRef pot;
  Rng rng;
  std::vector<double> arrivals;

  RefParticle(double zeta, double sigma, Rng r) : pot(zeta, sigma), rng(r) {}
};

struct RefEngine {
  Partition observed;
  ModelParams params;
  FitConfig config;
  std::vector<RefParticle> particles;
  WeightLedger ledger;
  PsiTable table;
  Rng system_rng;
  std::size_t step_idx = 0;
  std::int32_t k_seen = 0;
  double gap_mean = 0.0;

  RefEngine(Partition obs, const ModelParams& par, const FitConfig& cfg, std::uint64_t seed)
      : observed(std::move(obs)), params(par), config(cfg), table(par), system_rng(seed) {
    params.validate();
    if (config.n_particles < 2)
      throw std::invalid_argument("ParticleSystem: need at least 2 particles");
    particles.reserve(config.n_particles);
    for (std::size_t p = 0; p < config.n_particles; ++p)
      particles.emplace_back(params.levy.zeta, params.levy.sigma, system_rng.fork(p + 1));
    ledger.init(config.n_particles);
  }

  double proposal_scale() const {
    if (step_idx == 0 || gap_mean <= 0.0) return config.proposal_scale_init;
    return gap_mean;
  }

  void step() {
    if (step_idx >= observed.size())
      throw std::logic_error("ParticleSystem::step: all observations consumed");
    const std::int32_t label = observed.label(step_idx);
    const bool is_new = label == k_seen + 1;
    const double scale = proposal_scale();
    const double log_scale = std::log(scale);
    const double sigma = params.levy.sigma;
    const double zeta = params.levy.zeta;

    double tau_max = 0.0;
    for (const auto& p : particles) tau_max = std::max(tau_max, p.tau_prev);
    table.ensure(tau_max + scale * 11.0);

    const std::size_t n = particles.size();
    const int threads = config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::size_t p = 0; p < n; ++p) {
      auto& part = particles[p];
      const auto draw = propose_arrival(part.tau_prev, scale, log_scale, part.rng.uniform());
      double w = -part.pot.delta_log_sum(part.tau_prev, draw.tau) -
                 (table.psi(draw.tau) - part.psi_prev) - draw.log_q;
      if (is_new) {
        const double theta = part.rng.uniform() * draw.tau;
        w += params.base.log_density(theta) +
             (sigma - 1.0) * std::log(zeta + draw.tau - theta);
        w += std::log(draw.tau);
        part.pot.add_cluster(theta);
      } else {
        const auto j = static_cast<std::size_t>(label) - 1;
        w += std::log(part.pot.coef(j)) - std::log(zeta + draw.tau - part.pot.theta(j));
        part.pot.bump(j);
      }
      ledger.incr[p] = w;
      part.tau_prev = draw.tau;
      part.psi_prev = table.psi(draw.tau);
      part.pot.advance(draw.tau);
      if (config.keep_trajectories) part.arrivals.push_back(draw.tau);
    }
    if (is_new) ++k_seen;

    const bool resample_now = ledger.absorb_increments(config.ess_threshold, step_idx);

    double mean_tau = 0.0;
    for (std::size_t p = 0; p < n; ++p) mean_tau += ledger.w[p] * particles[p].tau_prev;
    gap_mean = mean_tau / static_cast<double>(step_idx + 1);

    ++step_idx;
    if (resample_now) resample();
  }

  void resample() {
    const auto ancestors = ledger.systematic_ancestors(system_rng.uniform());
    std::vector<RefParticle> next;
    next.reserve(particles.size());
    for (std::size_t k = 0; k < ancestors.size(); ++k) {
      next.push_back(particles[ancestors[k]]);
      next.back().rng = particles[ancestors[k]].rng.fork(k + 1);
    }
    particles = std::move(next);
    ledger.reset_uniform();
  }

  LatentState extract(std::size_t p) const {
    const auto& part = particles[p];
    LatentState state;
    state.labels.assign(observed.labels().begin(),
                        observed.labels().begin() + static_cast<long>(step_idx));
    const std::size_t k = part.pot.num_clusters();
    state.locations.resize(k);
    state.multiplicities.assign(k, 0);
    for (std::size_t j = 0; j < k; ++j) {
      state.locations[j] = part.pot.theta(j);
      state.multiplicities[j] =
          static_cast<std::int64_t>(std::llround(part.pot.coef(j) + params.levy.sigma));
    }
    if (config.keep_trajectories)
      state.arrivals = part.arrivals;
    else if (step_idx > 0)
      state.arrivals.assign(1, part.tau_prev);
    return state;
  }
};

// ---------------------------------------------------------------------------
// fast engine
//
// Particles are fixed-size records built for cheap per-step resampling:
// cluster locations live in an immutable shared block plus a small inline
// overlay (copy-on-materialize), multiplicities are shared across particles
// (the allocation sequence is observed), and the cluster potential is the
// windowed power-sum representation with recent clusters on an inline exact
// list evaluated breadth-first so the series vectorize.

constexpr int kTerms = 16;          // far power-series order
constexpr double kQ0 = 0.3;         // series argument bound
constexpr int kOverlayCap = 32;     // locations appended since materialization
constexpr int kExactCap = 160;      // clusters evaluated exactly
constexpr int kExactRebuild = 144;  // rebuild trigger
constexpr double kWindowSteps = 32.0;   // rebuild when tau - tau_ref exceeds
constexpr double kProposalReach = 10.0; // TN proposals stay below 10 sd
// far enrollment distance floor: series stays valid for the worst proposal
constexpr double kEnrollSteps = (kWindowSteps + kProposalReach) / kQ0;

struct FastParticle {
  double tau_prev = 0.0;
  double psi_prev = 0.0;
  double tau_ref = 0.0;
  double sums[kTerms] = {};
  Rng rng{0};
  std::shared_ptr<const std::vector<double>> base;  // immutable location prefix
  std::uint32_t base_size = 0;
  std::uint32_t psi_hint = 0;
  std::uint16_t overlay_count = 0;
  std::uint16_t exact_count = 0;
  bool window_valid = false;  // false: evaluate every cluster exactly
  bool needs_rebuild = true;
  double overlay[kOverlayCap];
  std::uint32_t exact_idx[kExactCap];
  std::vector<double> arrivals;  // only filled when keep_trajectories

  double theta(std::uint32_t j) const {
    return j < base_size ? (*base)[j] : overlay[j - base_size];
  }

  void append_theta(double value) {
    if (overlay_count == kOverlayCap) {
      auto merged = std::make_shared<std::vector<double>>();
      merged->reserve(base_size + kOverlayCap + 64);
      if (base) merged->assign(base->begin(), base->end());
      merged->insert(merged->end(), overlay, overlay + overlay_count);
      base = std::move(merged);
      base_size += overlay_count;
      overlay_count = 0;
    }
    overlay[overlay_count++] = value;
  }
};

struct FastEngine {
  Partition observed;
  ModelParams params;
  FitConfig config;
  std::vector<FastParticle> particles;
  std::vector<FastParticle> back_buffer;
  std::vector<double> coef;  // shared m_j - sigma, updated once per step
  WeightLedger ledger;
  PsiTable table;
  Rng system_rng;
  std::size_t step_idx = 0;
  std::int32_t k_seen = 0;
  double gap_mean = 0.0;

  FastEngine(Partition obs, const ModelParams& par, const FitConfig& cfg, std::uint64_t seed)
      : observed(std::move(obs)), params(par), config(cfg), table(par), system_rng(seed) {
    params.validate();
    if (config.n_particles < 2)
      throw std::invalid_argument("ParticleSystem: need at least 2 particles");
    particles.resize(config.n_particles);
    for (std::size_t p = 0; p < config.n_particles; ++p)
      particles[p].rng = system_rng.fork(p + 1);
    coef.reserve(1024);
    ledger.init(config.n_particles);
  }

  double proposal_scale() const {
    if (step_idx == 0 || gap_mean <= 0.0) return config.proposal_scale_init;
    return gap_mean;
  }

  // sum of coef_j log((zeta + tau_b - theta_j)/(zeta + tau_a - theta_j)) over
  // the exact list (breadth-first series with log1p fallback)
  double exact_delta(const FastParticle& part, double tau_a, double tau_b) const {
    const double zeta = params.levy.zeta;
    const double delta = tau_b - tau_a;
    const int count = part.exact_count;
    double x[kExactCap];
    double c[kExactCap];
    double series[kExactCap];
    double xk[kExactCap];
    for (int i = 0; i < count; ++i) {
      const auto j = part.exact_idx[i];
      x[i] = delta / (zeta + tau_a - part.theta(j));
      c[i] = coef[j];
      series[i] = 0.0;
      xk[i] = x[i];
    }
    // 12-term alternating series, breadth-first so the i-loop vectorizes;
    // good to ~4e-13 for |x| <= 0.15
    for (int k = 1; k <= 12; ++k) {
      const double inv_k = 1.0 / k;
#pragma omp simd
      for (int i = 0; i < count; ++i) {
        series[i] += xk[i] * inv_k;
        xk[i] *= -x[i];
      }
    }
    double acc = 0.0;
    for (int i = 0; i < count; ++i)
      acc += c[i] * (x[i] > 0.15 ? std::log1p(x[i]) : series[i]);
    return acc;
  }

  double exact_hazard(const FastParticle& part, double tau) const {
    const double zeta = params.levy.zeta;
    double acc = 0.0;
    for (int i = 0; i < part.exact_count; ++i) {
      const auto j = part.exact_idx[i];
      acc += coef[j] / (zeta + tau - part.theta(j));
    }
    return acc;
  }

  // full pass over all clusters; fallback when the window is unusable
  double full_delta(const FastParticle& part, double tau_a, double tau_b) const {
    const double zeta = params.levy.zeta;
    const double delta = tau_b - tau_a;
    double acc = 0.0;
    const std::uint32_t k = k_seen_of(part);
    for (std::uint32_t j = 0; j < k; ++j)
      acc += coef[j] * std::log1p(delta / (zeta + tau_a - part.theta(j)));
    return acc;
  }

  std::uint32_t k_seen_of(const FastParticle& part) const {
    return part.base_size + part.overlay_count;
  }

  // sum_k (-1)^(k+1) S_k (xb^k - xa^k)/k, both series in one pass
  double far_series_delta(const FastParticle& part, double xa, double xb) const {
    double acc = 0.0;
    double xak = xa, xbk = xb;
    double sign = 1.0;
    for (int k = 0; k < kTerms; ++k) {
      acc += sign * part.sums[k] * (xbk - xak) / (k + 1);
      xak *= xa;
      xbk *= xb;
      sign = -sign;
    }
    return acc;
  }

  double delta_log_sum(const FastParticle& part, double tau_a, double tau_b) const {
    if (!part.window_valid) return full_delta(part, tau_a, tau_b);
    return far_series_delta(part, tau_a - part.tau_ref, tau_b - part.tau_ref) +
           exact_delta(part, tau_a, tau_b);
  }

  void rebuild(FastParticle& part, double scale) const {
    constexpr int kBlock = 16;
    const double zeta = params.levy.zeta;
    const double tau = part.tau_prev;
    const double enroll_floor = kEnrollSteps * scale;
    part.tau_ref = tau;
    std::fill(part.sums, part.sums + kTerms, 0.0);
    part.exact_count = 0;
    part.window_valid = true;
    const std::uint32_t k = k_seen_of(part);
    bool overflow = false;
    // fold far clusters block-by-block so the power chains vectorize
    double cu[kBlock];
    double us[kBlock];
    int nb = 0;
    auto flush_block = [&] {
      double acc[kTerms] = {};
      double ukk[kBlock];
      for (int i = 0; i < nb; ++i) ukk[i] = us[i];
      for (int t = 0; t < kTerms; ++t) {
        double a = 0.0;
#pragma omp simd reduction(+ : a)
        for (int i = 0; i < nb; ++i) {
          a += cu[i] * ukk[i];
          ukk[i] *= us[i];
        }
        acc[t] = a;
      }
      for (int t = 0; t < kTerms; ++t) part.sums[t] += acc[t];
      nb = 0;
    };
    for (std::uint32_t j = 0; j < k; ++j) {
      const double d = zeta + tau - part.theta(j);
      if (d >= enroll_floor) {
        us[nb] = 1.0 / d;
        cu[nb] = coef[j];
        if (++nb == kBlock) flush_block();
      } else if (part.exact_count < kExactCap) {
        part.exact_idx[part.exact_count++] = j;
      } else {
        overflow = true;
      }
    }
    flush_block();
    if (overflow) part.window_valid = false;  // too crowded; evaluate exactly
    part.needs_rebuild = false;
  }

  void step() {
    if (step_idx >= observed.size())
      throw std::logic_error("ParticleSystem::step: all observations consumed");
    const std::int32_t label = observed.label(step_idx);
    const bool is_new = label == k_seen + 1;
    const auto j_label = static_cast<std::uint32_t>(label) - 1;
    const double scale = proposal_scale();
    const double log_scale = std::log(scale);
    const double log_coef_label = is_new ? 0.0 : std::log(coef[j_label]);
    const double sigma = params.levy.sigma;
    const double zeta = params.levy.zeta;

    double tau_max = 0.0;
    for (const auto& p : particles) tau_max = std::max(tau_max, p.tau_prev);
    table.ensure(tau_max + scale * (kProposalReach + 1.0));

    const std::size_t n = particles.size();
    const int threads = config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::size_t p = 0; p < n; ++p) {
      auto& part = particles[p];
      if (part.needs_rebuild) rebuild(part, scale);
      const auto draw = propose_arrival(part.tau_prev, scale, log_scale, part.rng.uniform());

      const double psi_tau = table.psi(draw.tau, part.psi_hint);
      double w = -delta_log_sum(part, part.tau_prev, draw.tau) - (psi_tau - part.psi_prev) -
                 draw.log_q;
      if (is_new) {
        const double theta = part.rng.uniform() * draw.tau;
        w += params.base.log_density(theta) +
             (sigma - 1.0) * std::log(zeta + draw.tau - theta);
        w += std::log(draw.tau);
        // enroll the newborn on the exact list until the next rebuild
        part.append_theta(theta);
        if (part.exact_count < kExactCap)
          part.exact_idx[part.exact_count++] = j_label;
        else
          part.window_valid = false;
      } else {
        const double theta_j = part.theta(j_label);
        w += log_coef_label - std::log(zeta + draw.tau - theta_j);
        if (part.window_valid) {
          bool on_exact_list = false;
          for (int i = 0; i < part.exact_count; ++i)
            if (part.exact_idx[i] == j_label) {
              on_exact_list = true;
              break;
            }
          if (!on_exact_list) {
            // far cluster: its multiplicity bump feeds the power sums
            const double u = 1.0 / (zeta + part.tau_ref - theta_j);
            double uk = u;
            for (int t = 0; t < kTerms; ++t, uk *= u) part.sums[t] += uk;
          }
        }
      }
      ledger.incr[p] = w;
      part.tau_prev = draw.tau;
      part.psi_prev = psi_tau;
      if (draw.tau - part.tau_ref > kWindowSteps * scale ||
          part.exact_count > kExactRebuild || !part.window_valid)
        part.needs_rebuild = true;
      if (config.keep_trajectories) part.arrivals.push_back(draw.tau);
    }

    // shared multiplicity update, once per step
    if (is_new) {
      coef.push_back(1.0 - sigma);
      ++k_seen;
    } else {
      coef[j_label] += 1.0;
    }

    const bool resample_now = ledger.absorb_increments(config.ess_threshold, step_idx);

    double mean_tau = 0.0;
    for (std::size_t p = 0; p < n; ++p) mean_tau += ledger.w[p] * particles[p].tau_prev;
    gap_mean = mean_tau / static_cast<double>(step_idx + 1);

    ++step_idx;
    if (resample_now) resample();
  }

  static void copy_particle(FastParticle& dst, const FastParticle& src) {
    dst.tau_prev = src.tau_prev;
    dst.psi_prev = src.psi_prev;
    dst.tau_ref = src.tau_ref;
    std::memcpy(dst.sums, src.sums, sizeof(src.sums));
    dst.base = src.base;
    dst.base_size = src.base_size;
    dst.psi_hint = src.psi_hint;
    dst.overlay_count = src.overlay_count;
    dst.exact_count = src.exact_count;
    dst.window_valid = src.window_valid;
    dst.needs_rebuild = src.needs_rebuild;
    std::memcpy(dst.overlay, src.overlay, src.overlay_count * sizeof(double));
    std::memcpy(dst.exact_idx, src.exact_idx, src.exact_count * sizeof(std::uint32_t));
    dst.arrivals = src.arrivals;
  }

  void resample() {
    const auto ancestors = ledger.systematic_ancestors(system_rng.uniform());
    back_buffer.resize(particles.size());
    for (std::size_t k = 0; k < ancestors.size(); ++k) {
      copy_particle(back_buffer[k], particles[ancestors[k]]);
      back_buffer[k].rng = particles[ancestors[k]].rng.fork(k + 1);
    }
    particles.swap(back_buffer);
    ledger.reset_uniform();
  }

  LatentState extract(std::size_t p) const {
    const auto& part = particles[p];
    LatentState state;
    state.labels.assign(observed.labels().begin(),
                        observed.labels().begin() + static_cast<long>(step_idx));
    const std::uint32_t k = k_seen_of(part);
    state.locations.resize(k);
    state.multiplicities.assign(k, 0);
    for (std::uint32_t j = 0; j < k; ++j) {
      state.locations[j] = part.theta(j);
      state.multiplicities[j] =
          static_cast<std::int64_t>(std::llround(coef[j] + params.levy.sigma));
    }
    if (config.keep_trajectories)
      state.arrivals = part.arrivals;
    else if (step_idx > 0)
      state.arrivals.assign(1, part.tau_prev);
    return state;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// public facade

struct ParticleSystem::Impl {
  std::variant<RefEngine, FastEngine> sys;

  template <class T, class... Args>
  Impl(std::in_place_type_t<T> tag, Args&&... args) : sys(tag, std::forward<Args>(args)...) {}

  template <class F>
  decltype(auto) visit(F&& f) {
    return std::visit(std::forward<F>(f), sys);
  }
  template <class F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), sys);
  }
};

ParticleSystem::ParticleSystem(Partition observed, const ModelParams& params,
                               const FitConfig& config, std::uint64_t seed) {
  if (config.kernel == Kernel::reference)
    impl_ = std::make_unique<Impl>(std::in_place_type<RefEngine>, std::move(observed), params,
                                   config, seed);
  else
    impl_ = std::make_unique<Impl>(std::in_place_type<FastEngine>, std::move(observed), params,
                                   config, seed);
}

ParticleSystem::~ParticleSystem() = default;
ParticleSystem::ParticleSystem(ParticleSystem&&) noexcept = default;
ParticleSystem& ParticleSystem::operator=(ParticleSystem&&) noexcept = default;

void ParticleSystem::step() {
  impl_->visit([](auto& s) { s.step(); });
}

void ParticleSystem::run_to_end() {
  impl_->visit([](auto& s) {
    while (s.step_idx < s.observed.size()) s.step();
  });
}

std::size_t ParticleSystem::current_step() const {
  return impl_->visit([](const auto& s) { return s.step_idx; });
}

std::size_t ParticleSystem::total_steps() const {
  return impl_->visit([](const auto& s) { return s.observed.size(); });
}

double ParticleSystem::log_evidence() const {
  return impl_->visit([](const auto& s) { return s.ledger.log_z; });
}

double ParticleSystem::ess() const {
  return impl_->visit([](const auto& s) { return s.ledger.ess_value; });
}

const std::vector<double>& ParticleSystem::ess_trace() const {
  return impl_->visit([](const auto& s) -> const std::vector<double>& { return s.ledger.trace; });
}

std::size_t ParticleSystem::num_particles() const {
  return impl_->visit([](const auto& s) { return s.particles.size(); });
}

const Partition& ParticleSystem::observed() const {
  return impl_->visit([](const auto& s) -> const Partition& { return s.observed; });
}

const ModelParams& ParticleSystem::params() const {
  return impl_->visit([](const auto& s) -> const ModelParams& { return s.params; });
}

std::vector<double> ParticleSystem::normalized_log_weights() const {
  return impl_->visit([](const auto& s) { return s.ledger.log_w; });
}

std::size_t ParticleSystem::sample_particle_index(Rng& rng) const {
  return impl_->visit([&](const auto& s) -> std::size_t {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t p = 0; p < s.ledger.log_w.size(); ++p) {
      cum += std::exp(s.ledger.log_w[p]);
      if (u < cum) return p;
    }
    return s.ledger.log_w.size() - 1;
  });
}

LatentState ParticleSystem::particle_state(std::size_t p) const {
  return impl_->visit([p](const auto& s) { return s.extract(p); });
}

void ParticleSystem::permute_particles(const std::vector<std::size_t>& perm) {
  impl_->visit([&](auto& s) {
    if (perm.size() != s.particles.size())
      throw std::invalid_argument("permute_particles: permutation size mismatch");
    std::decay_t<decltype(s.particles)> next;
    next.reserve(perm.size());
    std::vector<double> next_lw(perm.size()), next_w(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
      next.push_back(s.particles[perm[k]]);
      next_lw[k] = s.ledger.log_w[perm[k]];
      next_w[k] = s.ledger.w[perm[k]];
    }
    s.particles = std::move(next);
    s.ledger.log_w = std::move(next_lw);
    s.ledger.w = std::move(next_w);
  });
}

LoglikResult smc_marginal_loglik(const Partition& p, const ModelParams& params,
                                 const FitConfig& config, std::uint64_t seed) {
  ParticleSystem system(p, params, config, seed);
  system.run_to_end();
  return {system.log_evidence(), system.ess_trace()};
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xd1342543de82ef95ULL);
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x ^ 0x5851f42d4c957f2dULL;
}

struct GoldenEval {
  double mean = kNegInf;
  double sd = 0.0;
  int reps = 0;
  bool ok = true;
  std::string message;
};

// golden-section maximization of a noisy objective; returns every evaluated
// point so the argmax can be taken over all of them
template <class Objective>
std::map<double, GoldenEval> golden_search(Objective&& obj, double lo, double hi, int depth) {
  constexpr double kInvPhi = 0.6180339887498949;
  std::map<double, GoldenEval> evals;
  auto eval = [&](double x) -> const GoldenEval& {
    auto it = evals.find(x);
    if (it == evals.end()) it = evals.emplace(x, obj(x)).first;
    return it->second;
  };
  double a = lo, b = hi;
  double x1 = b - (b - a) * kInvPhi;
  double x2 = a + (b - a) * kInvPhi;
  double f1 = eval(x1).mean;
  double f2 = eval(x2).mean;
  for (int it = 0; it < depth; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + (b - a) * kInvPhi;
      f2 = eval(x2).mean;
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - (b - a) * kInvPhi;
      f1 = eval(x1).mean;
    }
  }
  return evals;
}

}  // namespace

FitResult fit_mle(const Partition& p, const FitConfig& config) {
  if (config.sigma_grid == 0 || config.xi_grid.empty())
    throw std::invalid_argument("fit_mle: grids must be nonempty");
  struct Task {
    double xi, sigma;
  };
  std::vector<Task> tasks;
  for (const double xi : config.xi_grid)
    for (std::size_t i = 0; i < config.sigma_grid; ++i)
      tasks.push_back({xi, static_cast<double>(i) / static_cast<double>(config.sigma_grid)});

  std::vector<SurfacePoint> surface(tasks.size());
  const int threads = config.threads > 0 ? config.threads : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    FitConfig run_cfg = config;
    run_cfg.threads = 1;  // grid points already run concurrently

    auto objective = [&](double zeta) -> GoldenEval {
      const double z = std::max(zeta, 1e-6);
      ModelParams mp(task.xi, config.gamma_coef, task.sigma, z);
      GoldenEval out;
      std::vector<double> values;
      for (int r = 0; r < config.replicates; ++r) {
        // common random numbers across zeta evaluations: the seed depends on
        // the grid point and replicate only
        const std::uint64_t seed = mix_seed(config.seed, t + 1, static_cast<std::uint64_t>(r + 1));
        try {
          values.push_back(smc_marginal_loglik(p, mp, run_cfg, seed).log_evidence);
        } catch (const degeneracy_error& err) {
          out.ok = false;
          out.message = err.what();
        }
      }
      out.reps = static_cast<int>(values.size());
      if (values.empty()) return out;
      double mean = 0.0;
      for (const double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (const double v : values) var += (v - mean) * (v - mean);
      out.mean = mean;
      out.sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
      return out;
    };

    const auto evals = golden_search(objective, config.zeta_lo, config.zeta_hi, config.zeta_depth);
    SurfacePoint point;
    point.xi = task.xi;
    point.sigma = task.sigma;
    point.ok = false;
    point.loglik_mean = kNegInf;
    for (const auto& [zeta, ev] : evals) {
      if (ev.reps > 0 && ev.mean > point.loglik_mean) {
        point.zeta = std::max(zeta, 1e-6);
        point.loglik_mean = ev.mean;
        point.loglik_sd = ev.sd;
        point.replicates = ev.reps;
        point.ok = true;
      }
      if (!ev.ok && point.message.empty()) point.message = ev.message;
    }
    if (!point.ok) {
      point.loglik_mean = kNegInf;
      if (point.message.empty()) point.message = "all evaluations degenerate";
    }
    surface[t] = point;
  }

  FitResult result;
  result.best_loglik = kNegInf;
  bool found = false;
  for (const auto& point : surface) {
    if (point.ok && point.loglik_mean > result.best_loglik) {
      result.best_loglik = point.loglik_mean;
      result.best = ModelParams(point.xi, config.gamma_coef, point.sigma, point.zeta);
      found = true;
    }
  }
  if (!found) throw numerical_error("fit_mle: every grid point degenerated");
  result.surface = std::move(surface);
  return result;
}

CrpFitResult fit_two_param_crp(const Partition& p, const FitConfig& config) {
  std::vector<double> sigma_values;
  for (std::size_t i = 0; i < config.sigma_grid; ++i)
    sigma_values.push_back(static_cast<double>(i) / static_cast<double>(config.sigma_grid));

  std::vector<SurfacePoint> surface(sigma_values.size());
  const int threads = config.threads > 0 ? config.threads : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::size_t t = 0; t < sigma_values.size(); ++t) {
    const double discount = sigma_values[t];
    auto objective = [&](double strength) -> GoldenEval {
      const double s = std::max(strength, 1e-6);
      GoldenEval out;
      out.mean = eppf_two_param_crp(p, CrpParams(discount, s));
      out.reps = 1;
      return out;
    };
    const auto evals = golden_search(objective, config.zeta_lo, config.zeta_hi, config.zeta_depth);
    SurfacePoint point;
    point.sigma = discount;
    point.loglik_mean = kNegInf;
    for (const auto& [strength, ev] : evals) {
      if (ev.mean > point.loglik_mean) {
        point.zeta = std::max(strength, 1e-6);
        point.loglik_mean = ev.mean;
        point.replicates = 1;
      }
    }
    point.ok = true;
    surface[t] = point;
  }

  CrpFitResult result;
  result.best_loglik = kNegInf;
  for (const auto& point : surface) {
    if (point.loglik_mean > result.best_loglik) {
      result.best_loglik = point.loglik_mean;
      result.best = CrpParams(point.sigma, point.zeta);
    }
  }
  result.surface = std::move(surface);
  return result;
}

std::vector<double> posterior_atom_weights(const LatentState& state, const ModelParams& params,
                                           Rng& rng) {
  const double tau_n = state.last_arrival();
  std::vector<double> weights(state.locations.size());
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double shape = static_cast<double>(state.multiplicities[j]) - params.levy.sigma;
    const double rate = params.levy.zeta + tau_n - state.locations[j];
    weights[j] = rng.gamma(shape, rate);
  }
  return weights;
}

}  // namespace micropart
