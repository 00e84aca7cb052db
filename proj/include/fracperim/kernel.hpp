#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fracperim/grid.hpp"

namespace fracperim {

/// Kernel |x-y|^{-n-s}. Both s = 0 and s = 1 are rejected.
struct KernelParams {
    double s = 0.5;
    int dim = 1;
    int near_field_order = 8;

    void validate() const;
};

/// Volume of the unit ball, pi^{n/2} / Gamma(n/2 + 1).
double unit_ball_volume(int n);

/// Exact value of int_a^b int_c^d |x-y|^{-1-s} dy dx for a < b <= c < d.
double interval_pair_exact(double a, double b, double c, double d, double s);

/// int_a^b int_c^inf |x-y|^{-1-s} dy dx for a < b <= c.
double interval_halfline_exact(double a, double b, double c, double s);

/// Interaction of two disjoint intervals in any order; endpoints may be
/// infinite. Two opposite half-lines give +inf.
double interval_interaction(double lo1, double hi1, double lo2, double hi2, double s);

/// Mass of the kernel outside a ball of radius R around a point:
/// n omega_n / (s R^s).
double tail_mass(double radius, const KernelParams& params);

/// Unit-cell pair weight for offset `offset` (|offset|_inf >= 1) by the
/// midpoint rule on one dyadic level with a Richardson correction.
double far_pair_weight(const CellCoord& offset, int dim, double s);

/// Unit-cell pair weight for 1 <= |offset|_inf <= 2 by dyadic subdivision to
/// `depth` levels. At the bottom level touching sub-pairs are closed with
/// the self-similarity w_{h/2} = 2^{-(n-s)} w_h, which turns the recursion
/// into a small linear system.
double near_pair_weight(const CellCoord& offset, int dim, double s, int depth);

/// Cell pair weights w(offset) for every offset with |offset|_inf <= max_offset.
class InteractionTable {
public:
    InteractionTable() = default;
    InteractionTable(GridSpec spec, KernelParams params, int max_offset, std::vector<double> weights);

    const GridSpec& spec() const { return spec_; }
    const KernelParams& params() const { return params_; }
    int max_offset() const { return max_offset_; }
    const std::vector<double>& data() const { return weights_; }

    /// Same dimension and cell size, and offsets cover the grid.
    bool compatible_with(const GridSpec& spec) const;

    /// Zero for the zero offset (same-cell pairs never contribute).
    double weight(const CellCoord& offset) const { return weights_[index_of(offset)]; }
    bool covers(const CellCoord& offset) const;

    /// Linear code of a cell coordinate; weight between cells with codes
    /// ci, cj is at(cj - ci).
    long code(const CellCoord& c) const {
        return c[0] * stride_[0] + c[1] * stride_[1] + c[2] * stride_[2];
    }
    double at(long code_difference) const { return weights_[static_cast<std::size_t>(center_ + code_difference)]; }

private:
    std::size_t index_of(const CellCoord& offset) const {
        return static_cast<std::size_t>(center_ + code(offset));
    }

    GridSpec spec_;
    KernelParams params_;
    int max_offset_ = 0;
    long stride_[3] = {0, 0, 0};
    long center_ = 0;
    std::vector<double> weights_;
};

InteractionTable build_table(const GridSpec& spec, const KernelParams& params, int max_offset);

/// Binary cache: magic, version, (dim, s, h, max_offset, near_field_order),
/// then little-endian doubles in lexicographic offset order.
void save_table(const InteractionTable& table, const std::string& path);
InteractionTable load_table(const std::string& path);

}  // namespace fracperim
