#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractlab/conformal_map.hpp"

namespace tractlab {

// s = prefix followed by tail repeated forever.
struct Address {
    std::vector<long> prefix;
    std::vector<long> tail{0};

    long operator[](std::size_t n) const;
    long max_abs(std::size_t upto) const;
    static Address parse(const std::string& text);  // "1,-2" or "1,-2;0" (prefix;tail)
    std::string str() const;
};

// F^(z) = F(z - 2 pi i s) for z in T + 2 pi i s.
LogPolarPoint ext_forward(const MapKernel& k, cplx z, long s);
// F^_s^{-1}(w) = F^{-1}(w) + 2 pi i s.
cplx inverse_branch(const MapKernel& k, cplx w, long s);

struct Box {
    double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    int depth = 0;

    double diam() const { return std::hypot(x1 - x0, y1 - y0); }
    bool inside(const Box& outer, double tol) const;
};

struct BoxCover {
    int depth = 0;
    std::vector<Box> boxes;
    double diam_max = 0.0;
    double core_diam_max = 0.0;  // same, before the eps inflation

    nlohmann::json to_json() const;
};

struct CoverOptions {
    double x_cut = 40.0;  // X_j^j is the strip box [4, x_cut] x [-pi, pi] + 2 pi i s_j
    int nx = 8, ny = 2;   // sub-boxes of X_j^j
    int side_samples = 8; // boundary points per sub-box side
    long s_max = 8;       // largest |s_n| accepted
};

// X_0^j: the truncated strip box pulled back through j inverse branches.
// Each sub-box is carried as a sample of its boundary; the reported box is the
// bounding box of the image, inflated by 2 eps_map per pullback.
BoxCover continuum_cover(const MapKernel& k, const Address& s, int depth, const CoverOptions& opt = {});

// Hausdorff distance between the box-corner sets of two covers.
double cover_hausdorff(const BoxCover& a, const BoxCover& b);

struct Window {
    double x0 = 4, x1 = 12, y0 = -4, y1 = 4;
    int width = 640, height = 320;

    static Window parse(const std::string& text);  // "x0,x1,y0,y1[,w,h]"
};

// Binary PPM (P6): white background, boxes filled with a colour per depth.
std::vector<std::uint8_t> render(const std::vector<BoxCover>& covers, const Window& win);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace tractlab
