#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractlab/sc_strip.hpp"
#include "tractlab/tract.hpp"

namespace tractlab {

// w = exp(lambda + i theta) in the right half-plane.
struct LogPolarPoint {
    double lambda = 0.0;
    double theta = 0.0;

    double log_re() const;  // log Re w
    cplx value() const { return std::polar(std::exp(lambda), theta); }
    static LogPolarPoint from(cplx w) { return {std::log(std::abs(w)), std::arg(w)}; }
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MapOptions {
    double eps_target = 1e-6;  // z-plane units
    double table_step = 0.5;   // spacing of the real-axis table in the strip
    double tail_margin = 40.0; // strip distance past the last prevertex where the exact tail takes over
    int max_refinements = 3;
};

struct DerivativeEstimate {
    double log_value = 0.0;  // log |F'(z)|
    double value = 0.0;      // may be inf when |F'| overflows
    double rel_err = 0.0;    // discrepancy between analytic and centred-difference values
};

struct GeodesicArc {
    double lambda = 0.0;
    std::vector<cplx> polyline;
    double diam = 0.0;
};

struct NuEstimate {
    double nu = 0.0;
    double argmax_lambda = 0.0;
    std::size_t geodesics = 0;
};

class MapKernel {
public:
    static MapKernel build(const WiggleSpec& spec, const MapOptions& opt = {});
    static MapKernel from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    const WiggleSpec& spec() const { return spec_; }
    const StripSC& sc() const { return sc_; }
    const MapOptions& options() const { return opt_; }
    double eps_map() const { return eps_map_; }
    double scale() const { return a_; }   // w = scale * exp(u) + i * shift
    double shift() const { return b_; }
    std::string fingerprint() const;
    // Strip abscissa past which the map is exactly the straight-strip tail.
    double tail_start() const { return xe_; }
    double solve_residual() const { return solve_residual_; }

    // Strip level: z = f(u) and its inverse.
    cplx strip_to_tract(cplx u) const;
    cplx tract_to_strip(cplx z) const;
    cplx log_strip_derivative(cplx u) const { return sc_.log_dfdu(u); }

    LogPolarPoint strip_to_w(cplx u) const;
    cplx w_to_strip(LogPolarPoint w) const;
    // du/d(lambda) along the positive real axis of the half-plane.
    cplx dstrip_dlambda(double lambda) const;

    LogPolarPoint forward(cplx z) const;
    cplx inverse(LogPolarPoint w) const;
    cplx inverse(cplx w) const { return inverse(LogPolarPoint::from(w)); }

    DerivativeEstimate derivative_modulus(cplx z) const;
    double log_abs_derivative(cplx z) const;
    // Density of the hyperbolic metric of T (with 1/Re w on the half-plane).
    double hyperbolic_density(cplx z) const;

    GeodesicArc vertical_geodesic(double lambda, int samples = 64) const;
    NuEstimate estimate_nu(double lambda_lo, double lambda_hi, double step, int samples) const;
    NuEstimate estimate_nu(double step = 0.1, int samples = 64) const;

    // Error checks behind eps_map, exposed for reporting.
    double vertex_closure_error() const;
    double table_consistency_error() const;
    double round_trip_error() const;  // max |F^-1(F(z)) - z| on a fixed interior sample

private:
    void assemble(double quad_tol);
    cplx table_eval(cplx u, long index) const;
    bool newton(cplx z, cplx seed, cplx* out) const;
    bool visible(cplx a, cplx b) const;  // segment a-b avoids every slit

    WiggleSpec spec_;
    MapOptions opt_;
    StripSC sc_;
    double quad_tol_ = 1e-12;
    double solve_residual_ = 0.0;

    // real-axis table: f(xs_ + i*h_) for i = 0..n-1
    double xs_ = -40.0, xe_ = 0.0, h_ = 0.5;
    std::vector<cplx> table_;
    cplx z_left_{4.0, 0.0};
    cplx d_left_{0.0, 0.0};
    cplx c_inf_{0.0, 0.0};

    // Newton seeds bucketed by floor(Re z)
    struct Seed {
        cplx u, z;
    };
    std::vector<Seed> seeds_;
    std::vector<Segment> slits_;
    std::vector<std::vector<std::size_t>> buckets_;
    double bucket_x0_ = 0.0;

    double a_ = 1.0, b_ = 0.0;
    double eps_map_ = 0.0;
};

std::string spec_hash(const WiggleSpec& spec);

}  // namespace tractlab
