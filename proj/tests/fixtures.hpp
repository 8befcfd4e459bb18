#pragma once

// Reference matrices for XY+XZ+YZ (and XY+XZ) on a 3x2x2 table of X, Y, Z,
// laid out in a different row order, with the conversions to ours.

#include <string>
#include <vector>

namespace fixture {

using IntRows = std::vector<std::vector<int>>;

// Rows run X fastest, then Y, then Z; columns follow our design order.
inline const IntRows kXll = {
    {1, 0, 0, 0, 0, 0, 0, 0, 0, 0}, {1, 1, 0, 0, 0, 0, 0, 0, 0, 0}, {1, 0, 1, 0, 0, 0, 0, 0, 0, 0},
    {1, 0, 0, 1, 0, 0, 0, 0, 0, 0}, {1, 1, 0, 1, 0, 1, 0, 0, 0, 0}, {1, 0, 1, 1, 0, 0, 1, 0, 0, 0},
    {1, 0, 0, 0, 1, 0, 0, 0, 0, 0}, {1, 1, 0, 0, 1, 0, 0, 1, 0, 0}, {1, 0, 1, 0, 1, 0, 0, 0, 1, 0},
    {1, 0, 0, 1, 1, 0, 0, 0, 0, 1}, {1, 1, 0, 1, 1, 1, 0, 1, 0, 1}, {1, 0, 1, 1, 1, 0, 1, 0, 1, 1}};

inline const std::vector<std::string> kLambda = {"Intercept", "X(1)",    "X(2)",    "Y(1)",    "Z(1)",
                                                 "XY(1,1)",   "XY(2,1)", "XZ(1,1)", "XZ(2,1)", "YZ(1,1)"};

inline const IntRows kT = {{0, 0, 0, 1, 0, 0, 0, 0, 0, 0},
                           {0, 0, 0, 0, 0, 1, 0, 0, 0, 0},
                           {0, 0, 0, 0, 0, 0, 1, 0, 0, 0},
                           {0, 0, 0, 0, 0, 0, 0, 0, 0, 1}};

inline const std::vector<std::string> kLambdaR = {"Y(1)", "XY(1,1)", "XY(2,1)", "YZ(1,1)", "Intercept",
                                                  "X(1)", "X(2)",    "Z(1)",    "XZ(1,1)", "XZ(2,1)"};

// Y = 1 block then Y = 0 block; within a block X fastest, then Z.
inline const IntRows kXrll = {
    {1, 0, 0, 0, 1, 0, 0, 0, 0, 0}, {1, 1, 0, 0, 1, 1, 0, 0, 0, 0}, {1, 0, 1, 0, 1, 0, 1, 0, 0, 0},
    {1, 0, 0, 1, 1, 0, 0, 1, 0, 0}, {1, 1, 0, 1, 1, 1, 0, 1, 1, 0}, {1, 0, 1, 1, 1, 0, 1, 1, 0, 1},
    {0, 0, 0, 0, 1, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 1, 1, 0, 0, 0, 0}, {0, 0, 0, 0, 1, 0, 1, 0, 0, 0},
    {0, 0, 0, 0, 1, 0, 0, 1, 0, 0}, {0, 0, 0, 0, 1, 1, 0, 1, 1, 0}, {0, 0, 0, 0, 1, 0, 1, 1, 0, 1}};

// XY+XZ: Z is dropped from the logistic model and cycles slowest, so the
// reference order is already ours.
inline const std::vector<std::string> kLambdaRQ2 = {"Y(1)", "XY(1,1)", "XY(2,1)", "Intercept", "X(1)",
                                                    "X(2)", "Z(1)",    "XZ(1,1)", "XZ(2,1)"};

inline const IntRows kXrllQ2 = {
    {1, 0, 0, 1, 0, 0, 0, 0, 0}, {1, 1, 0, 1, 1, 0, 0, 0, 0}, {1, 0, 1, 1, 0, 1, 0, 0, 0},
    {1, 0, 0, 1, 0, 0, 1, 0, 0}, {1, 1, 0, 1, 1, 0, 1, 1, 0}, {1, 0, 1, 1, 0, 1, 1, 0, 1},
    {0, 0, 0, 1, 0, 0, 0, 0, 0}, {0, 0, 0, 1, 1, 0, 0, 0, 0}, {0, 0, 0, 1, 0, 1, 0, 0, 0},
    {0, 0, 0, 1, 0, 0, 1, 0, 0}, {0, 0, 0, 1, 1, 0, 1, 1, 0}, {0, 0, 0, 1, 0, 1, 1, 0, 1}};

inline const IntRows kTrQ2 = {{1, 0, 0, 0, 0, 0, 0, 0, 0}, {0, 1, 0, 0, 0, 0, 0, 0, 0}, {0, 0, 1, 0, 0, 0, 0, 0, 0}};

/// Our X_ll row for reference row r (levels x, y, z of a 3x2x2 table).
inline int xll_row(int r) { return (r % 3) * 4 + ((r / 3) % 2) * 2 + r / 6; }

/// Our X_rll row for reference row r of the q = 1 example.
inline int xrll_row(int r) {
  const int block = r / 6, within = r % 6;
  return block * 6 + (within % 3) * 2 + within / 3;
}

}  // namespace fixture
