#pragma once
// Frozen reference values. Generated by scripts/gen_oracles.py;
// regenerate with: python3 scripts/gen_oracles.py > tests/oracle_data.hpp
// Do not edit by hand.

namespace oracle {

inline constexpr double golden_theta = 0.6180339887498949;
inline constexpr double ltheta_series_golden_K40 = -0.2147623404739213;
inline constexpr double ltheta_series_eighth_K40 = -2.5418362756880617;

inline constexpr int azuma_grid_size = 20;
// columns: n, s, exact two-sided tail P(|S_n| >= s)
inline constexpr double azuma_grid[20][3] = {
    {20, 2.0, 0.8238029479980469},
    {20, 4, 0.5034446716308594},
    {20, 6, 0.26317596435546875},
    {20, 9, 0.04138946533203125},
    {50, 5, 0.47988766169832786},
    {50, 10, 0.20263875106454066},
    {50, 15, 0.032839137564268484},
    {50, 22, 0.0026021714567221466},
    {100, 10, 0.36820161732669626},
    {100, 20, 0.05688793364098079},
    {100, 30, 0.0035176417229701583},
    {100, 45, 4.69241261264223e-06},
    {200, 20, 0.17896403953325127},
    {200, 40, 0.0056851559967503055},
    {200, 60, 2.6528755595268476e-05},
    {200, 90, 1.5280548809315588e-10},
    {400, 40, 0.05104022312914799},
    {400, 80, 7.426568076372639e-05},
    {400, 120, 2.0465070564643173e-09},
    {400, 180, 8.286388000983607e-20},
};
inline constexpr double binom_tail_n100_s20 = 0.05688793364098079;

// wedge^2 of [[2,-1,0],[3,1,4],[-2,5,1]], basis e0^e1, e0^e2, e1^e2
inline constexpr double wedge2_fixture_in[3][3] = {
    {2, -1, 0},
    {3, 1, 4},
    {-2, 5, 1},
};
inline constexpr double wedge2_fixture_out[3][3] = {
    {5, 8, -4},
    {8, 2, -1},
    {17, 11, -19},
};

}  // namespace oracle
