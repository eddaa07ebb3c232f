#pragma once

#include "mwgs/grid.hpp"

namespace mwgs {

// Orthonormal analysis pair; validated so that synthesis doubles as both
// inverse and adjoint.
struct FilterPair {
    std::vector<double> low;
    std::vector<double> high;

    static FilterPair haar();
    static FilterPair db2();
    static FilterPair by_name(const std::string& name);

    void validate() const;
};

struct SubbandSet {
    Map3 ll, lh, hl, hh;
};

// One-level separable 2D DWT per channel. Requires even height and width.
// Sub-band naming: the first letter is the filter applied along height,
// the second along width.
SubbandSet dwt2(const Map3& f, const FilterPair& filters);

// Exact inverse of dwt2 for orthonormal filters.
Map3 idwt2(const SubbandSet& s, const FilterPair& filters);

// Adjoint of dwt2; identical to idwt2 in the orthonormal case but kept as
// its own entry point so gradient code reads as such.
Map3 dwt2_backward(const SubbandSet& grad, const FilterPair& filters);

// Full packet tree: recursive dwt2 on all four children, flattened
// depth-first in (LL, LH, HL, HH) order; 4^level leaves.
std::vector<Map3> wavelet_packet(const Map3& f, int level, const FilterPair& filters);

// Adjoint of wavelet_packet over the flattened leaf gradients.
Map3 wavelet_packet_adjoint(const std::vector<Map3>& leaf_grads, int level, const FilterPair& filters);

}  // namespace mwgs
