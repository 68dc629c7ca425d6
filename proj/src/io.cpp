#include "cdyn/io.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "cdyn/errors.hpp"

namespace cdyn::io {

namespace {

std::vector<double> parse_row(const std::string& line, int line_no) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
        } catch (const std::exception&) {
            throw ConfigError("bad number '" + cell + "' in field file", line_no);
        }
    }
    return out;
}

std::vector<std::vector<double>> read_rows(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        rows.push_back(parse_row(line, line_no));
        if (rows.back().size() != rows.front().size()) throw ConfigError("ragged field file", line_no);
    }
    return rows;
}

}  // namespace

void write_field_csv(std::ostream& out, const ScalarField& f) {
    out << std::setprecision(17);
    for (int iy = 0; iy < f.ny(); ++iy) {
        for (int ix = 0; ix < f.nx(); ++ix) {
            if (ix > 0) out << ',';
            out << f.at(ix, iy);
        }
        out << '\n';
    }
}

ScalarField read_field_csv(std::istream& in, const GridGeometry& geometry) {
    const auto rows = read_rows(in);
    if (rows.size() != static_cast<std::size_t>(geometry.ny) ||
        (!rows.empty() && rows.front().size() != static_cast<std::size_t>(geometry.nx))) {
        throw ConfigError("field file shape does not match the grid");
    }
    std::vector<double> values;
    values.reserve(geometry.cells());
    for (const auto& r : rows) values.insert(values.end(), r.begin(), r.end());
    return ScalarField(geometry, std::move(values));
}

ScalarField read_field_csv(std::istream& in, double spacing) {
    const auto rows = read_rows(in);
    if (rows.empty()) throw ConfigError("empty field file");
    GridGeometry g{static_cast<int>(rows.front().size()), static_cast<int>(rows.size()), spacing, spacing};
    std::vector<double> values;
    for (const auto& r : rows) values.insert(values.end(), r.begin(), r.end());
    return ScalarField(g, std::move(values));
}

GrayImage to_gray(const std::vector<double>& values, int width, int height) {
    if (width < 1 || height < 1 || values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ParameterError("image shape does not match the data");
    }
    GrayImage img{width, height, std::vector<std::uint8_t>(values.size(), 0)};
    const double top = *std::max_element(values.begin(), values.end());
    if (!(top > 0.0)) return img;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = std::clamp(values[i] / top, 0.0, 1.0);
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
    return img;
}

GrayImage to_gray(const ScalarField& f) {
    const auto v = f.values();
    return to_gray(std::vector<double>(v.begin(), v.end()), f.nx(), f.ny());
}

void write_pgm(std::ostream& out, const GrayImage& img) {
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

GrayImage read_pgm(std::istream& in) {
    auto token = [&in]() {
        std::string t;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string skip;
                std::getline(in, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
                continue;
            }
            t += c;
        }
        return t;
    };
    if (token() != "P5") throw ConfigError("not a binary PGM file");
    GrayImage img;
    try {
        img.width = std::stoi(token());
        img.height = std::stoi(token());
        if (std::stoi(token()) != 255) throw ConfigError("only maxval 255 is supported");
    } catch (const std::invalid_argument&) {
        throw ConfigError("malformed PGM header");
    }
    if (img.width < 1 || img.height < 1) throw ConfigError("malformed PGM header");
    img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw ConfigError("truncated PGM data");
    return img;
}

std::string render_ascii(const ScalarField& red, const ScalarField& blue) {
    if (!(red.geometry() == blue.geometry())) throw GeometryError("ascii render needs matching grids");
    const double rmax = red.max(), bmax = blue.max();
    auto decile = [](double v, double top) {
        if (!(top > 0.0) || !(v > 0.0)) return 0;
        return std::clamp(static_cast<int>(std::ceil(10.0 * v / top)), 1, 10);
    };
    std::string out;
    out.reserve(static_cast<std::size_t>(red.nx() + 1) * static_cast<std::size_t>(red.ny()));
    for (int iy = red.ny() - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < red.nx(); ++ix) {
            const int r = decile(red.at(ix, iy), rmax), b = decile(blue.at(ix, iy), bmax);
            if (r == 0 && b == 0) out += '.';
            else if (r >= b) out += static_cast<char>('a' + r - 1);
            else out += static_cast<char>('A' + b - 1);
        }
        out += '\n';
    }
    return out;
}

ScalarField occupancy_field(const std::vector<ca::Agent>& agents, ca::Side side, int lattice) {
    ScalarField f(GridGeometry{lattice, lattice, 1.0, 1.0});
    for (const auto& a : agents) {
        if (a.living() && a.side == side) f.at(a.pos.x, a.pos.y) = 1.0;
    }
    return f;
}

void write_agents_csv(std::ostream& out, const std::vector<ca::Agent>& agents) {
    out << "side,x,y,health\n";
    for (const auto& a : agents) {
        if (!a.living()) continue;
        out << ca::to_string(a.side) << ',' << a.pos.x << ',' << a.pos.y << ','
            << (a.health == ca::Health::alive ? "alive" : "injured") << '\n';
    }
}

std::vector<ca::Agent> read_agents_csv(std::istream& in) {
    std::vector<ca::Agent> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;
        std::stringstream ss(line);
        std::string side, x, y, health;
        if (!std::getline(ss, side, ',') || !std::getline(ss, x, ',') || !std::getline(ss, y, ',') ||
            !std::getline(ss, health)) {
            throw ConfigError("malformed agent line", line_no);
        }
        ca::Agent a;
        if (side == "red") a.side = ca::Side::red;
        else if (side == "blue") a.side = ca::Side::blue;
        else throw ConfigError("unknown side '" + side + "'", line_no);
        try {
            a.pos = {std::stoi(x), std::stoi(y)};
        } catch (const std::exception&) {
            throw ConfigError("bad agent position", line_no);
        }
        if (health == "alive") a.health = ca::Health::alive;
        else if (health == "injured") a.health = ca::Health::injured;
        else throw ConfigError("unknown health '" + health + "'", line_no);
        out.push_back(a);
    }
    return out;
}

}  // namespace cdyn::io
