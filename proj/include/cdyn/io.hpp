#pragma once

// File formats for snapshots.
//
// Field CSV: one line per grid row, rows in increasing y, values separated by
// commas and printed with 17 significant digits.
//
// PGM: binary P5, maxval 255, rows in increasing y (the same order as the
// CSV), pixel = round(255 * value / max) with max the field's largest value;
// an all-zero field maps to all-zero pixels.
//
// Agent CSV: header "side,x,y,health" then one living agent per line.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cdyn/ca.hpp"
#include "cdyn/grid.hpp"

namespace cdyn::io {

void write_field_csv(std::ostream& out, const ScalarField& f);
// Reads values back onto `geometry`; throws ConfigError on a shape mismatch.
ScalarField read_field_csv(std::istream& in, const GridGeometry& geometry);
// Infers nx and ny from the file; dx = dy = `spacing`.
ScalarField read_field_csv(std::istream& in, double spacing);

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

GrayImage to_gray(const ScalarField& f);
// Same scaling on a raw row-major array.
GrayImage to_gray(const std::vector<double>& values, int width, int height);
void write_pgm(std::ostream& out, const GrayImage& img);
GrayImage read_pgm(std::istream& in);

// One character per cell, top row = highest y. Each force's density is
// binned into deciles of its own maximum; red uses "abcdefghij" and blue
// "ABCDEFGHIJ" (higher letter = denser), the denser-by-decile force wins a
// shared cell (red on ties) and empty cells print '.'.
std::string render_ascii(const ScalarField& red, const ScalarField& blue);

// Unit density on every cell occupied by a living agent of `side`.
ScalarField occupancy_field(const std::vector<ca::Agent>& agents, ca::Side side, int lattice);

void write_agents_csv(std::ostream& out, const std::vector<ca::Agent>& agents);
std::vector<ca::Agent> read_agents_csv(std::istream& in);

}  // namespace cdyn::io
