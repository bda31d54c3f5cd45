#pragma once

// Small shared world for the unit tests: the default twin pair with reduced
// grids so every test binary builds it in about a second.

#include "ambiview/ambiguity.hpp"
#include "ambiview/codebook.hpp"
#include "ambiview/synthworld.hpp"

#include <array>

namespace ambiview::testing {

struct SmallWorld {
    TwinPair pair;
    ViewGrid codebook_grid;
    ViewGrid coarse;
    std::array<Codebook, 2> codebooks;
    std::array<AmbiguityTable, 2> tables;
    RankOptions rank_options;

    [[nodiscard]] std::vector<const SynthObject*> objects() const { return {&pair.a, &pair.b}; }
};

inline const SmallWorld& small_world() {
    static const SmallWorld w = [] {
        SmallWorld s;
        s.pair = make_ambiguous_pair(PairParams{});
        s.codebook_grid = build_view_grid(256, 12);
        s.coarse = build_view_grid(256, 1);
        s.codebooks = {build_codebook(s.pair.a, s.codebook_grid), build_codebook(s.pair.b, s.codebook_grid)};
        s.rank_options.descent.steps = 32;
        s.rank_options.descent.initial_step = default_initial_step(s.coarse.size());
        s.tables = rank_pair(s.pair, s.codebooks[0], s.codebooks[1], s.coarse.rotations, s.rank_options);
        return s;
    }();
    return w;
}

} // namespace ambiview::testing
