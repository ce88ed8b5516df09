#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace tractlab {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Wiggle abscissae of a tract in the family. r[j] is where the corridor turns
// up into the top channel, R[j] where it finally leaves the bottom channel.
struct WiggleSpec {
    std::vector<double> r;
    std::vector<double> R;

    std::size_t size() const { return r.size(); }
    bool empty() const { return r.empty(); }
    // R[-1] = 5 by convention.
    double right_of(long j) const { return j < 0 ? 5.0 : R[static_cast<std::size_t>(j)]; }
    bool operator==(const WiggleSpec&) const = default;
};

struct SpecCheck {
    bool ok = true;
    std::string violation;  // first violated inequality, empty when ok
};

SpecCheck validate_spec(const WiggleSpec& spec);

// A vertex of one boundary chain. `turn` is the SC exponent beta = alpha - 1
// of the interior angle alpha*pi at this vertex.
struct Corner {
    cplx z;
    double turn = 0.0;
    bool tip = false;
};

struct Segment {
    cplx a, b;
};

// The boundary of T = S minus slits, cut at Re = xmax. Both chains run from the
// left edge (x = 4) to the right; slits are traversed on both sides so each
// chain is a closed-up polyline around its attached slits.
struct TractBoundary {
    WiggleSpec spec;
    double xmax = 0.0;
    std::vector<Corner> upper;  // starts at 4 + i*pi
    std::vector<Corner> lower;  // starts at 4 - i*pi
    std::vector<Segment> slits; // four per wiggle, in the order r, y=pi/3, R, y=-pi/3
    std::vector<cplx> tips;     // distinguished slit tips
};

TractBoundary build_boundary(const WiggleSpec& spec, double xmax);

// Default truncation: well past the last wiggle.
double default_xmax(const WiggleSpec& spec);

enum class Membership { inside, outside, boundary };

// Strict interior test against the untruncated tract.
Membership classify(const WiggleSpec& spec, cplx z, double tol = 1e-12);
inline bool contains(const WiggleSpec& spec, cplx z) { return classify(spec, z) == Membership::inside; }

// Euclidean distance from z to the boundary of the untruncated tract.
double boundary_distance(const WiggleSpec& spec, cplx z);

// W_j = {r_j < Re < R_j, Im < pi/3}.
bool in_wiggle_region(const WiggleSpec& spec, cplx z, long* which = nullptr);

// Polyline from 5 out to abscissa xmax staying distance >= 1/2 from the boundary.
struct SpineCurve {
    std::vector<cplx> points;
};

SpineCurve spine(const WiggleSpec& spec, double xmax);
// Length of the spine up to the first point with real part x.
double spine_length_to(const SpineCurve& s, double x);

}  // namespace tractlab
