#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractlab/conformal_map.hpp"

namespace tractlab {

// A value of phi^n sits too close to a turning value to decide which side it is on.
struct TangencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// An iterate left [4, inf).
struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Quadruple {
    double A = 0, B = 0, C = 0, D = 0;

    double size() const;  // min(A - 5, B - A, C - B, D - C)
    bool valid() const;   // increasing and all >= 9
    bool operator==(const Quadruple&) const = default;
};

// Q < Qt: At < A < B < Bt < Ct < C < D < Dt (Qt is the larger one).
bool smaller_than(const Quadruple& q, const Quadruple& qt);
// max(A - At, Bt - B, C - Ct, Dt - D)
double quadruple_distance(const Quadruple& q, const Quadruple& qt);

struct Piece {
    double lo, hi;  // in log t; hi = inf for the last piece
    int dir;        // +1 increasing, -1 decreasing
};

struct Root {
    double lambda;  // log t
    double err;     // error bar in log t
};

// phi(t) = Re F^{-1}(t) on [4, inf), handled in lambda = log t so that t up to
// e^(1e300) stays representable; values x = phi(t) are plain doubles.
class ProjectionMap {
public:
    static ProjectionMap build(std::shared_ptr<const MapKernel> kernel, double scan_step = 0.02);

    const MapKernel& kernel() const { return *kernel_; }
    std::shared_ptr<const MapKernel> kernel_ptr() const { return kernel_; }

    double operator()(double t) const { return value_log(std::log(t)); }
    double value_log(double lambda) const;
    // d phi / d lambda
    double slope_log(double lambda) const;

    const std::vector<Piece>& pieces() const { return pieces_; }
    const std::vector<double>& turning_points() const { return turns_; }
    std::vector<double> turning_values() const;
    double eps() const { return eps_; }
    double tol_break() const { return tol_break_; }
    // Beyond this lambda phi is exactly 2 lambda + tail_offset().
    double linear_from() const { return lambda_lin_; }
    double tail_offset() const { return kappa_; }
    // Largest value phi takes left of the last turning point (4 if monotone):
    // every x above it has exactly one preimage, on the final increasing piece.
    double monotone_above() const { return monotone_above_; }

    // phi^n(t) given log t. Throws RangeError if an iterate drops below 4.
    double iterate_log(double lambda, int n) const;
    double iterate(double t, int n) const { return iterate_log(std::log(t), n); }

    // All lambda in [lo, hi] with phi(e^lambda) = x, one per crossing piece, sorted.
    // Throws TangencyError when x is within 10 eps of a turning value in range.
    std::vector<Root> preimages(double x, double lo = -1.0, double hi = INFINITY, double x_err = 0.0) const;

    // (lambda, t, phi, err) rows for a CSV dump.
    std::vector<std::array<double, 4>> sample(double lo, double hi, int n) const;

private:
    double solve_on_piece(const Piece& p, double x) const;

    std::shared_ptr<const MapKernel> kernel_;
    std::vector<Piece> pieces_;
    std::vector<double> turns_;
    double eps_ = 0.0, tol_break_ = 0.0;
    double lambda_lin_ = 0.0, kappa_ = 0.0;
    double lambda_min_ = 0.0;
    double monotone_above_ = 4.0;
};

enum class Pattern { BCB, CBC };  // two B-preimages surround a C-preimage, or vice versa

struct CrookednessWitness {
    Pattern pattern = Pattern::BCB;
    double t1 = 0, t_mid = 0, t2 = 0;  // log t
    double margin = 0.0;               // min witness gap over the larger error bar
    bool inherited = false;            // carried through a monotone tail pullback
};

struct CoverInterval {
    double lo = 0, hi = 0;          // log t; meaningless when symbolic
    double lo_err = 0, hi_err = 0;  // error bars in log t
    bool lo_maps_to_A = true;       // phi^n(lo) = A, else phi^n(lo) = D
    // Exact pullbacks through the final increasing piece past the last
    // representable ancestor. Such an interval is phi^{-depth} of that ancestor,
    // and since the pullback is monotone it inherits count and crookedness.
    int symbolic_depth = 0;
    std::size_t parent = 0;
    std::vector<Root> b_points, c_points;  // J cap phi^{-n}(B), J cap phi^{-n}(C)
    std::optional<CrookednessWitness> witness;

    bool symbolic() const { return symbolic_depth > 0; }
    bool crooked() const { return witness.has_value(); }
};

struct IntervalFamily {
    Quadruple q;
    int n = 0;
    std::vector<CoverInterval> intervals;

    std::size_t crooked_count() const;
    bool all_crooked() const { return !intervals.empty() && crooked_count() == intervals.size(); }
    double min_margin() const;  // over crooked intervals; inf if none
    nlohmann::json to_json() const;
};

// U_0 = {[A, D]} with B and C as the marked points.
IntervalFamily base_family(const Quadruple& q);
// U_{n+1} = union of U_1(J), J in U_n, with marked points pulled back.
IntervalFamily pull_back(const ProjectionMap& phi, const IntervalFamily& fam);
IntervalFamily minimal_covers(const ProjectionMap& phi, const Quadruple& q, int n);
// U_0 .. U_n in one pass.
std::vector<IntervalFamily> cover_levels(const ProjectionMap& phi, const Quadruple& q, int n);

// Witness from sorted marked-point lists, or none.
std::optional<CrookednessWitness> find_witness(const std::vector<Root>& b, const std::vector<Root>& c);

// Decide crookedness of an arbitrary interval [lo, hi] (log t) under phi^n by
// recursive pullback of B and C through the forward images of the interval.
std::optional<CrookednessWitness> is_crooked(const ProjectionMap& phi, double lo, double hi, int n, const Quadruple& q);

struct HypothesisResult {
    bool ok = false;
    int n_star = -1;
    std::vector<std::pair<std::size_t, std::size_t>> counts;  // (crooked, total) for n = n_lo..
    int n_lo = 0;
    IntervalFamily family;    // U_{n*} if ok, else the last examined
    bool persists = false;    // U_{n*+1} also all crooked
    double min_margin = 0.0;
    std::string message;
};

HypothesisResult hypothesis_check(const ProjectionMap& phi, const Quadruple& q, int n_lo, int n_hi);

// Least n0 with every interval of U_{n0} right of R_{N-1} + nu0.
int stabilize_n0(const ProjectionMap& phi, const Quadruple& q, double nu0, int n_cap = 12);

}  // namespace tractlab
