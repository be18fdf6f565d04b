//
// Copyright 2026 The FedCVR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Frozen outputs of the scripts in tests/oracles/, shared by the unit tests
// and the acceptance binary.

#ifndef FEDCVR_TESTS_REFERENCE_VALUES_HPP_
#define FEDCVR_TESTS_REFERENCE_VALUES_HPP_

#include <vector>

namespace fedcvr::reference {

// strategy_oracle.py: scalar server trajectories from w = 0 with default
// hyperparameters (lr 0.1, b1 0.9, b2 0.999, tau 1e-3).
inline const std::vector<double> kStream{0.7, -1.3, 0.25, 2.0, -0.4};
inline const std::vector<double> kCvr3{-0.09990009990009992, -0.09464219990535785, -0.12818798990871244};
inline const std::vector<double> kCvr5{-0.09985734664764621, -0.0661183282219428, -0.05106823442086966,
                                       -0.09018110582129292, -0.11419810257046392};
inline const std::vector<double> kYogi5{-0.09985734664764621, -0.0661221165777763, -0.05108097304059127,
                                        -0.09017847378249677, -0.11417457274216453};
inline const std::vector<double> kAdagrad5{-0.09985734664764621, -0.011869829321705133, -0.02855320257167307,
                                           -0.10856922018672747, -0.09276716423466251};

// stats_oracle.py: regularized incomplete beta and Welch / paired t-tests.
struct BetaCase {
  double a, b, x, value;
};
inline const std::vector<BetaCase> kBeta{
    {0.5, 0.5, 0.3, 0.36901011956554536}, {1, 1, 0.42, 0.42},
    {2, 3, 0.4, 0.5247999999999999},      {5, 0.5, 0.9, 0.3166429150200122},
    {0.5, 5, 0.05, 0.515208786901603},    {10, 10, 0.5, 0.5},
    {2.5, 7.5, 0.2, 0.40123869824719194}, {30, 0.5, 0.97, 0.17821754497024136},
    {1.5, 0.5, 0.999, 0.9597433418849682}, {100, 120, 0.47, 0.6783849714203625},
};

struct WelchCase {
  std::vector<double> a, b;
  double t, df, p;
};
inline const std::vector<WelchCase> kWelch{
    {{0.85, 0.86, 0.84, 0.85, 0.87}, {0.92, 0.91, 0.93, 0.92, 0.92}, -11.000000000000037, 6.680412371134019,
     1.5937099803942796e-05},
    {{1, 2, 3, 4, 5}, {2, 4, 6, 8, 10}, -1.8973665961010275, 5.882352941176471, 0.10753119493062718},
    {{0.1, 0.5, 0.3}, {0.2, 0.4, 0.35, 0.25, 0.3, 0.33}, -0.04197138526954467, 2.2620385988289105,
     0.9699375134302398},
    {{10, 12, 9, 11}, {10.5, 10.7}, -0.1530931089239481, 3.1403015589062098, 0.8876372619058636},
    {{0.88, 0.90, 0.87, 0.89, 0.86}, {0.96, 0.95, 0.97, 0.96, 0.95}, -9.749999999999972, 6.077151335311574,
     6.18868111623581e-05},
};
// Paired test on kWelch[0].
inline constexpr double kPairedT = -8.819620983110005;
inline constexpr double kPairedP = 0.000912047693993318;

// rdp_oracle.py: q = 1, sigma = 1, one step, delta = 1e-5.
inline constexpr double kEpsilonFullBatch = 5.2985259121880812076;

}  // namespace fedcvr::reference

#endif  // FEDCVR_TESTS_REFERENCE_VALUES_HPP_
