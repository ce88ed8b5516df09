#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractlab/conformal_map.hpp"
#include "tractlab/projection.hpp"

namespace tractlab {

struct BuildConfig {
    double K = 1.0;          // minimal quadruple size in the schedule
    int n_guard = 4;         // lower-order guard parameter n
    int stages = 1;
    double cap = 13.0;       // schedule: D <= cap
    int max_wiggles = 5;     // desk-scale stage cap N_max
    double tau = 20.0;       // Caratheodory probe window
    double rho_eps = 0.0;    // probe tolerance; 0 = distance between consecutive chain quadruples
    int rho_steps = 4;       // doubling steps tried by choose_rho
    double probe_width = 4.0;
    int n_max = 6;           // largest iterate examined for certificates
    std::optional<double> nu0;      // measured when unset
    std::optional<double> growth_C; // measured when unset
    MapOptions map;

    nlohmann::json to_json() const;
    static BuildConfig from_json(const nlohmann::json& j);
};

struct Certificate {
    Quadruple q;
    int n_star = -1;
    std::size_t total = 0;
    std::vector<bool> crooked;  // per interval of U_{n*}
    bool persists = false;      // U_{n*+1} all crooked as well
    double min_margin = 0.0;
    std::string kernel_fingerprint;
    double eps_map = 0.0;
    IntervalFamily family;

    // The decision content: Q, n*, counts, flags. Two runs agree iff these match.
    nlohmann::json canonical() const;
    nlohmann::json to_json() const;
    static Certificate from_json(const nlohmann::json& j);
};

// Certificate for q on the given map, or nullopt if no n <= n_max works.
std::optional<Certificate> certify(const ProjectionMap& phi, const Quadruple& q, int n_max);
// Rebuild the kernel for spec with opt and recompute; true iff canonical content matches.
bool reverify(const Certificate& cert, const WiggleSpec& spec, const MapOptions& opt, Certificate* fresh = nullptr);

struct GuardParams {
    int n_guard = 4;
    double C = 0.0;
    double nu0 = 0.0;
};

struct BuildState {
    WiggleSpec spec;
    std::vector<Certificate> certificates;
    std::vector<double> rho_history;
    std::size_t schedule_pos = 0;
    GuardParams guard;

    nlohmann::json to_json() const;
    static BuildState from_json(const nlohmann::json& j);
};

// All integer quadruples with |Q| >= K and D <= cap, sorted by (D, A, B, C).
std::vector<Quadruple> quadruple_schedule(double K, double cap);

// Q shrunk inward by delta: (A + d, B - d, C + d, D - d), so the result is smaller than q.
Quadruple shrink(const Quadruple& q, double delta);

struct PlaceReport {
    bool placed = false;
    WiggleSpec spec;          // with the new wiggle appended when placed
    Quadruple q_hat;          // (A^, B^, C^, D^) of the targeted minimal interval
    int n1 = 0;
    double spread = 0.0;      // min(B^ - A^, D^ - C^)
    std::size_t non_crooked = 0;
    std::string message;
};

// Append one wiggle over the right-most non-crooked interval of U_{n1}(q).
PlaceReport place_wiggle(const ProjectionMap& phi, const Quadruple& q, double nu0, double rho_required, int n1_max = 6);

struct RhoReport {
    double rho = 0.0;
    bool achieved = false;
    std::vector<std::pair<double, double>> sups;  // (rho, sup |phi^n - phi~^n|)
};

// Doubling probe from R_{N-1} + 2: sup over t in [4, 2 R_N], iterates with
// min(phi^n, phi~^n) <= tau, of |phi^n(t) - phi~^n(t)| for a probe wiggle (rho, rho + width).
RhoReport choose_rho(const ProjectionMap& phi, double eps, double tau, int steps, double probe_width = 4.0,
                     bool stop_early = true, const MapOptions& opt = {});
double rho_probe_sup(const ProjectionMap& phi, const ProjectionMap& probe, double tau, double t_max);

// rho_min = n (nu0/2 + C (R_{N-1} + 1)) + nu0
double lower_order_guard(const WiggleSpec& spec, const GuardParams& g);

struct GrowthSample {
    double r = 0.0;
    double s = 0.0;  // max over Re zeta = r of log Re F(zeta) / r
};
std::vector<GrowthSample> measure_growth(const MapKernel& k, const std::vector<double>& r_grid, int y_samples = 200);

struct GrowthFit {
    double C = 0.0;
    std::size_t samples = 0;
    cplx worst;
};
// Smallest C with Re z/C <= log|F(z)| <= C Re z off the wiggles and the R_j form inside them.
GrowthFit measure_growth_constant(const MapKernel& k, int samples = 1000, std::uint64_t seed = 7);

struct StageReport {
    bool ok = false;
    Quadruple q;
    std::size_t m = 0;                 // non-crooked count for the starting chain quadruple
    std::vector<std::size_t> m_trace;  // non-crooked count after each inner step
    std::vector<PlaceReport> placements;
    std::vector<RhoReport> rho;
    std::optional<Certificate> certificate;
    std::string message;
};

// One stage: drive the non-crooked count of U_n(q) to zero by appending wiggles.
StageReport run_stage(BuildState& state, const Quadruple& q, const BuildConfig& cfg);

// Working nu0 and C for a spec: the larger of the value on the spec and on the reference one-wiggle tract.
GuardParams measure_guard(const WiggleSpec& spec, const BuildConfig& cfg);

}  // namespace tractlab
