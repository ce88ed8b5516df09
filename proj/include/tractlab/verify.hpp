#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractlab/builder.hpp"
#include "tractlab/conformal_map.hpp"
#include "tractlab/model_dynamics.hpp"
#include "tractlab/projection.hpp"

namespace tractlab {

// One inequality checked over a sample. `slack` is the worst (bound - measured)
// after normalisation, so pass <=> slack >= 0; the witness is the worst point.
struct CheckResult {
    std::string name;
    bool pass = true;
    double worst = 0.0;   // measured quantity at the witness
    double bound = 0.0;   // what it was compared to
    double slack = INFINITY;
    std::size_t samples = 0;
    std::string witness;
    nlohmann::json extra = nlohmann::json::object();

    // record one sample: measured must not exceed bound
    void observe(double measured, double limit, const std::string& where);
    nlohmann::json to_json() const;
};

struct VerifyOptions {
    int samples = 1000;
    std::uint64_t seed = 1;
    double tau = 20.0;
    double rho_eps = 1e-3;
    int rho_steps = 4;
    int cover_depth = 20;
    int un1_intervals = 20;
};

// |F'(z)| >= (Re F(z) / 2)(1 - 1e-4) at interior samples.
CheckResult check_expansion(const MapKernel& k, int samples, std::uint64_t seed);
// |F^-1(w1) - F^-1(w2)| <= |w1 - w2| / 2 for Re w >= 4.
CheckResult check_inverse_contraction(const MapKernel& k, int samples, std::uint64_t seed);
// |F^-1(F(z)) - z| <= 10 eps_map.
CheckResult check_round_trip(const MapKernel& k, int samples, std::uint64_t seed);
// Items (a)-(d) of the basic projection estimates, slack 10 eps_phi.
std::vector<CheckResult> check_phi_properties(const ProjectionMap& phi, int samples, std::uint64_t seed);
// |Re F^-1(z) - phi(Re z)| <= 6 for Re z >= 4, |Im z| <= Re z + 2 pi.
CheckResult check_f_and_phi(const ProjectionMap& phi, int samples, std::uint64_t seed);
// Orbits-enter-a-sector implication on sampled pairs with |z - w| >= delta(nu).
CheckResult check_sector(const MapKernel& k, double nu, int samples, std::uint64_t seed);
// estimate_nu at (0.1, 64) vs (0.05, 128): relative change <= 1%.
CheckResult check_nu_stability(const MapKernel& k);
// #U_1(I) = 1 for random admissible I away from the wiggle window.
CheckResult check_un1(const ProjectionMap& phi, double nu0, int intervals, std::uint64_t seed);
// Doubling rho-sequence: sups non-increasing and the last one <= eps.
CheckResult check_caratheodory(const ProjectionMap& phi, double eps, double tau, int steps);
// Backward cover contraction on core diameters, slack 10 eps_map.
CheckResult check_cover_contraction(const MapKernel& k, const Address& s, int depth);

// Slope s(r) of log max Re F over vertical cross-sections: within [0.45, 0.55]
// for r >= 30 when spec is empty; otherwise min s <= 1/2 + 1/n_guard + 0.05.
// Also s(r) >= 1 / (2 C).
CheckResult check_lower_order(const MapKernel& k, int n_guard, double C);

// Growth: C fitted on `calibration` seeds, then validated on a fresh sample of every spec.
struct GrowthReport {
    double C = 0.0;
    std::vector<double> per_spec;  // fitted constant per spec
    CheckResult check;
};
GrowthReport check_growth(const std::vector<const MapKernel*>& kernels, int samples, std::uint64_t seed);

struct VerificationReport {
    WiggleSpec spec;
    double eps_map = 0.0;
    double nu0 = 0.0;
    std::vector<CheckResult> checks;

    bool pass() const;
    nlohmann::json to_json() const;
};

VerificationReport verify_all(const WiggleSpec& spec, const MapOptions& map_opt, const VerifyOptions& opt);

}  // namespace tractlab
