#pragma once

// Environmental fluctuation statistics: Wigner sampling, the signed spectral
// split of a density fluctuation, semicircle checks and collision-rate formulas.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "collapse_lab/error.hpp"
#include "collapse_lab/rng.hpp"

namespace collapse_lab::incoherence {

using CMatrix = Eigen::MatrixXcd;

/// 4 / (3 pi): mean positive part of the semicircle law.
inline constexpr double kSemicircleWeight = 4.0 / (3.0 * std::numbers::pi);

// ---------------------------------------------------------------- environment

/// Gas parameters in cgs units.
struct EnvironmentParams {
    double n_e = 1e19;
    double v_e = 1e5;
    double s_area = 6.0;
    double length = 1.0;
    double c_s = 3.4e4;
};

struct EnvironmentRates {
    double collision_rate = 0.0;
    double n_waves = 0.0;
    double n_fluct_waves = 0.0;
    double delta_t = 0.0;
};

inline void validate(const EnvironmentParams& e) {
    std::string msg;
    auto check = [&](double v, const char* name, bool allow_inf) {
        if (std::isnan(v) || v <= 0.0 || (!allow_inf && std::isinf(v))) msg += std::string("\n  ") + name + " must be strictly positive";
    };
    check(e.n_e, "n_e", false);
    check(e.v_e, "v_e", false);
    check(e.s_area, "s_area", false);
    check(e.length, "length", false);
    check(e.c_s, "c_s", true);
    if (!msg.empty()) throw ValidationError("invalid environment:" + msg);
}

inline EnvironmentRates environment_rates(const EnvironmentParams& e) {
    validate(e);
    EnvironmentRates r;
    r.collision_rate = e.n_e * e.v_e * e.s_area;
    r.delta_t = e.length / e.c_s;
    r.n_waves = r.collision_rate * r.delta_t;
    r.n_fluct_waves = std::sqrt(r.n_waves);
    return r;
}

// ------------------------------------------------------------------- sampling

enum class Ensemble { wigner_normalized, exponential_spectrum };

inline const char* to_string(Ensemble e) {
    return e == Ensemble::wigner_normalized ? "wigner-normalized" : "exponential-spectrum";
}

struct HermitianSample {
    std::size_t n = 0;
    /// For wigner-normalized samples this is Omega with E|omega|^2 = 1/n; the
    /// density fluctuation is Omega / n. For exponential-spectrum samples it is rho_n.
    CMatrix entries;
    Ensemble ensemble = Ensemble::wigner_normalized;
    std::uint64_t seed = 0;
    /// Drawn eigenvalues (exponential-spectrum only).
    std::vector<double> spectrum;
};

/// Complex Hermitian Wigner matrix: off-diagonal real and imaginary parts with
/// variance 1/(2n), real diagonal with variance 1/n. The real-symmetric variant
/// draws real off-diagonals with variance 1/n.
inline HermitianSample sample_wigner(std::size_t n, std::uint64_t seed, bool real_symmetric = false) {
    if (n < 2) throw ValidationError("Wigner sample needs n >= 2");
    Rng rng(seed);
    const double nn = static_cast<double>(n);
    std::normal_distribution<double> diag(0.0, std::sqrt(1.0 / nn));
    std::normal_distribution<double> half(0.0, std::sqrt(0.5 / nn));
    HermitianSample s;
    s.n = n;
    s.seed = seed;
    s.entries = CMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index c = 0; c < s.entries.cols(); ++c) {
        s.entries(c, c) = diag(rng);
        for (Eigen::Index r = c + 1; r < s.entries.rows(); ++r) {
            const std::complex<double> z = real_symmetric ? std::complex<double>(diag(rng), 0.0)
                                                          : std::complex<double>(half(rng), half(rng));
            s.entries(r, c) = z;
            s.entries(c, r) = std::conj(z);
        }
    }
    return s;
}

/// Haar-random unitary: QR of a complex Ginibre matrix with R's diagonal phases removed.
inline CMatrix haar_unitary(std::size_t n, Rng& rng) {
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    const auto m = static_cast<Eigen::Index>(n);
    CMatrix z(m, m);
    for (Eigen::Index c = 0; c < m; ++c)
        for (Eigen::Index r = 0; r < m; ++r) z(r, c) = {g(rng), g(rng)};
    Eigen::HouseholderQR<CMatrix> qr(z);
    CMatrix q = qr.householderQ();
    const CMatrix& rr = qr.matrixQR();
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto d = rr(k, k);
        const double a = std::abs(d);
        q.col(k) *= a > 0.0 ? d / a : std::complex<double>(1.0, 0.0);
    }
    return q;
}

namespace detail {

inline std::vector<double> exponential_draws(std::size_t n, Rng& rng) {
    std::exponential_distribution<double> law(static_cast<double>(n));
    std::vector<double> out(n);
    for (double& p : out) p = law(rng);
    return out;
}

}  // namespace detail

/// The eigenvalues sample_exponential_spectrum would draw for the same seed.
inline std::vector<double> draw_exponential_spectrum(std::size_t n, std::uint64_t seed) {
    if (n < 2) throw ValidationError("exponential-spectrum sample needs n >= 2");
    Rng rng(seed);
    return detail::exponential_draws(n, rng);
}

/// rho_n = U diag(p') U^dagger with p' i.i.d. exponential of mean 1/n and U Haar.
inline HermitianSample sample_exponential_spectrum(std::size_t n, std::uint64_t seed) {
    if (n < 2) throw ValidationError("exponential-spectrum sample needs n >= 2");
    Rng rng(seed);
    HermitianSample s;
    s.n = n;
    s.seed = seed;
    s.ensemble = Ensemble::exponential_spectrum;
    s.spectrum = detail::exponential_draws(n, rng);
    const CMatrix u = haar_unitary(n, rng);
    Eigen::VectorXd d(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) d(static_cast<Eigen::Index>(i)) = s.spectrum[i];
    s.entries = u * d.asDiagonal() * u.adjoint();
    s.entries = 0.5 * (s.entries + s.entries.adjoint()).eval();
    return s;
}

// ----------------------------------------------------------------- statistics

struct EntryStats {
    std::complex<double> mean_offdiag;
    double mean_diag = 0.0;
    double mean_abs2_offdiag = 0.0;
    double var_diag = 0.0;
    std::size_t n_offdiag = 0;
};

/// Moments over the strict upper triangle and the diagonal.
inline EntryStats entry_stats(const HermitianSample& s) {
    EntryStats st;
    const auto n = s.entries.rows();
    for (Eigen::Index c = 0; c < n; ++c) {
        st.mean_diag += s.entries(c, c).real();
        for (Eigen::Index r = 0; r < c; ++r) {
            st.mean_offdiag += s.entries(r, c);
            st.mean_abs2_offdiag += std::norm(s.entries(r, c));
            ++st.n_offdiag;
        }
    }
    st.mean_diag /= static_cast<double>(n);
    st.mean_offdiag /= static_cast<double>(st.n_offdiag);
    st.mean_abs2_offdiag /= static_cast<double>(st.n_offdiag);
    for (Eigen::Index c = 0; c < n; ++c) st.var_diag += std::pow(s.entries(c, c).real() - st.mean_diag, 2);
    st.var_diag /= static_cast<double>(n - 1);
    return st;
}

struct SpectrumStats {
    double mean = 0.0;
    double variance = 0.0;
    double trace = 0.0;
    /// variance / p^2 with p = 1/n; 1 for the exponential law.
    double variance_over_p2 = 0.0;
    /// variance / mean, the literal mean-variance relation; equals p for the exponential law.
    double variance_over_mean = 0.0;
};

inline SpectrumStats spectrum_stats(const std::vector<double>& eig, std::size_t n) {
    SpectrumStats st;
    for (double e : eig) st.trace += e;
    st.mean = st.trace / static_cast<double>(eig.size());
    for (double e : eig) st.variance += (e - st.mean) * (e - st.mean);
    st.variance /= static_cast<double>(eig.size() - 1);
    const double p = 1.0 / static_cast<double>(n);
    st.variance_over_p2 = st.variance / (p * p);
    st.variance_over_mean = st.variance / st.mean;
    return st;
}

/// Eigenvalues of a Hermitian matrix, ascending.
inline std::vector<double> eigenvalues(const CMatrix& m) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw RuntimeError("eigenvalue solver failed");
    const auto& v = es.eigenvalues();
    return {v.data(), v.data() + v.size()};
}

inline double hermiticity_defect(const CMatrix& m) {
    if (m.size() == 0) return 0.0;
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline CMatrix traceless(const CMatrix& m) {
    const auto n = m.rows();
    const std::complex<double> shift = m.trace() / static_cast<double>(n);
    return m - shift * CMatrix::Identity(n, n);
}

// ------------------------------------------------------------------ splitting

struct FluctuationSplit {
    CMatrix rho_plus;
    CMatrix rho_minus;
    double w_plus = 0.0;
    double w_minus = 0.0;
};

namespace detail {

inline void require_hermitian(const CMatrix& m) {
    if (m.rows() != m.cols()) throw ValidationError("matrix must be square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (hermiticity_defect(m) > 1e-12 * scale) throw ValidationError("matrix is not Hermitian");
}

}  // namespace detail

/// Positive and negated-negative spectral parts; eigenvalues within
/// 1e-12 * ||m|| of zero go to neither.
inline FluctuationSplit split_signed(const CMatrix& m) {
    detail::require_hermitian(m);
    const auto n = m.rows();
    FluctuationSplit out;
    out.rho_plus = CMatrix::Zero(n, n);
    out.rho_minus = CMatrix::Zero(n, n);
    if (n == 0) return out;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
    if (es.info() != Eigen::Success) throw RuntimeError("eigenvalue solver failed");
    const auto& q = es.eigenvalues();
    const double cut = 1e-12 * q.cwiseAbs().maxCoeff();
    const CMatrix& v = es.eigenvectors();
    for (Eigen::Index k = 0; k < n; ++k) {
        if (q(k) > cut) {
            out.rho_plus.noalias() += q(k) * v.col(k) * v.col(k).adjoint();
            out.w_plus += q(k);
        } else if (q(k) < -cut) {
            out.rho_minus.noalias() -= q(k) * v.col(k) * v.col(k).adjoint();
            out.w_minus -= q(k);
        }
    }
    return out;
}

struct SignedWeights {
    double w_plus = 0.0;
    double w_minus = 0.0;
};

/// Traces of the signed parts without forming them.
inline SignedWeights signed_weights(const std::vector<double>& eig) {
    SignedWeights w;
    double norm = 0.0;
    for (double q : eig) norm = std::max(norm, std::abs(q));
    const double cut = 1e-12 * norm;
    for (double q : eig) {
        if (q > cut) w.w_plus += q;
        else if (q < -cut) w.w_minus -= q;
    }
    return w;
}

struct WeightOptions {
    /// Project Omega onto its traceless part before splitting.
    bool traceless = true;
    bool real_symmetric = false;
};

struct WeightSample {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double w_plus = 0.0;
    double w_minus = 0.0;
    double ks = 0.0;
};

/// w_plus, w_minus of the fluctuation Omega/n and the semicircle KS distance of Omega.
inline WeightSample weigh_sample(const HermitianSample& s, bool make_traceless = true);

struct WeightEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::vector<WeightSample> samples;
};

// ----------------------------------------------------------------- semicircle

inline double semicircle_density(double x) {
    return std::abs(x) >= 2.0 ? 0.0 : std::sqrt(4.0 - x * x) / (2.0 * std::numbers::pi);
}

inline double semicircle_cdf(double x) {
    if (x <= -2.0) return 0.0;
    if (x >= 2.0) return 1.0;
    return 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * std::numbers::pi) + std::asin(x / 2.0) / std::numbers::pi;
}

/// Kolmogorov-Smirnov distance between the empirical law of values and a CDF.
template <class Cdf>
double ks_distance(std::vector<double> values, Cdf cdf) {
    if (values.empty()) throw ValidationError("KS distance needs at least one value");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double f = cdf(values[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

/// KS distance of the eigenvalues x = n q' of the fluctuation Omega/n (i.e. of Omega) to the semicircle.
inline double semicircle_distance(const HermitianSample& s) {
    if (s.ensemble != Ensemble::wigner_normalized) throw ValidationError("semicircle distance needs a Wigner sample");
    return ks_distance(eigenvalues(s.entries), semicircle_cdf);
}

/// Draws from the semicircle law on [-2, 2] by rejection.
inline std::vector<double> sample_semicircle(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> ux(-2.0, 2.0), uy(0.0, 1.0 / std::numbers::pi);
    std::vector<double> out;
    out.reserve(count);
    while (out.size() < count) {
        const double x = ux(rng);
        if (uy(rng) <= semicircle_density(x)) out.push_back(x);
    }
    return out;
}

inline WeightSample weigh_sample(const HermitianSample& s, bool make_traceless) {
    const CMatrix m = make_traceless ? traceless(s.entries) : s.entries;
    auto eig = eigenvalues(m);
    WeightSample out;
    out.n = s.n;
    out.seed = s.seed;
    const double inv_n = 1.0 / static_cast<double>(s.n);
    const auto w = signed_weights(eig);
    out.w_plus = w.w_plus * inv_n;
    out.w_minus = w.w_minus * inv_n;
    out.ks = ks_distance(std::move(eig), semicircle_cdf);
    return out;
}

/// Mean w_plus over Wigner samples; sample k uses substream (master_seed, k).
inline WeightEstimate incoherence_weight(std::size_t samples, std::size_t n, std::uint64_t master_seed,
                                         const WeightOptions& opt = {}) {
    if (samples < 1) throw ValidationError("incoherence_weight needs at least one sample");
    WeightEstimate est;
    est.samples.reserve(samples);
    for (std::size_t k = 0; k < samples; ++k) {
        const auto s = sample_wigner(n, substream_seed(master_seed, k), opt.real_symmetric);
        est.samples.push_back(weigh_sample(s, opt.traceless));
    }
    double sum = 0.0;
    for (const auto& w : est.samples) sum += w.w_plus;
    est.mean = sum / static_cast<double>(samples);
    if (samples > 1) {
        double ss = 0.0;
        for (const auto& w : est.samples) ss += (w.w_plus - est.mean) * (w.w_plus - est.mean);
        est.standard_error = std::sqrt(ss / static_cast<double>(samples - 1) / static_cast<double>(samples));
    }
    return est;
}

}  // namespace collapse_lab::incoherence
