#include "ratekit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ratekit/errors.hpp"

namespace ratekit::report {

std::string format_double(double v) {
    char buf[40];
    if (std::isnan(v)) return "null";
    if (std::isinf(v)) return v > 0 ? "1e999" : "-1e999";
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

JValue& JValue::set(const std::string& key, JValue v) {
    if (kind_ != Kind::Object) throw NumericsError("JValue::set on a non-object");
    for (auto& [k, val] : obj_) {
        if (k == key) {
            val = std::move(v);
            return *this;
        }
    }
    obj_.emplace_back(key, std::move(v));
    return *this;
}

JValue& JValue::push(JValue v) {
    if (kind_ != Kind::Array) throw NumericsError("JValue::push on a non-array");
    arr_.push_back(std::move(v));
    return *this;
}

namespace {

void write_escaped(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

}  // namespace

void JValue::write(std::string& out, int indent, int depth) const {
    const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
    const std::string pad1(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    switch (kind_) {
        case Kind::Null: out += "null"; return;
        case Kind::Bool: out += bool_ ? "true" : "false"; return;
        case Kind::Number: out += format_double(num_); return;
        case Kind::String: write_escaped(out, str_); return;
        case Kind::Array: {
            if (arr_.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < arr_.size(); ++i) {
                out += pad1;
                arr_[i].write(out, indent, depth + 1);
                if (i + 1 < arr_.size()) out += ',';
                out += '\n';
            }
            out += pad + "]";
            return;
        }
        case Kind::Object: {
            if (obj_.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            for (std::size_t i = 0; i < obj_.size(); ++i) {
                out += pad1;
                write_escaped(out, obj_[i].first);
                out += ": ";
                obj_[i].second.write(out, indent, depth + 1);
                if (i + 1 < obj_.size()) out += ',';
                out += '\n';
            }
            out += pad + "}";
            return;
        }
    }
}

std::string JValue::dump(int indent) const {
    std::string out;
    write(out, indent, 0);
    out += '\n';
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ValidationError("cannot write file: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

namespace {

constexpr int kW = 720, kH = 480;
constexpr int kML = 70, kMR = 20, kMT = 40, kMB = 50;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct Axis {
    double lo = 0, hi = 1;
    void grow(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void init() {
        lo = std::numeric_limits<double>::infinity();
        hi = -std::numeric_limits<double>::infinity();
    }
    void finish() {
        if (!(lo < hi)) {
            lo -= 1;
            hi += 1;
        }
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
};

std::string svg_header(const std::string& title) {
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kW) +
         "\" height=\"" + std::to_string(kH) + "\" viewBox=\"0 0 " + std::to_string(kW) + " " +
         std::to_string(kH) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + std::to_string(kW / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
         title + "</text>\n";
    return s;
}

void axes(std::string& s, const Axis& ax, const Axis& ay, const std::string& xl,
          const std::string& yl) {
    s += "<line x1=\"" + std::to_string(kML) + "\" y1=\"" + std::to_string(kH - kMB) +
         "\" x2=\"" + std::to_string(kW - kMR) + "\" y2=\"" + std::to_string(kH - kMB) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + std::to_string(kML) + "\" y1=\"" + std::to_string(kMT) + "\" x2=\"" +
         std::to_string(kML) + "\" y2=\"" + std::to_string(kH - kMB) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = ax.lo + (ax.hi - ax.lo) * i / 4.0;
        const double px = kML + (kW - kML - kMR) * i / 4.0;
        s += "<text x=\"" + num(px) + "\" y=\"" + std::to_string(kH - kMB + 18) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + num(fx) +
             "</text>\n";
        const double fy = ay.lo + (ay.hi - ay.lo) * i / 4.0;
        const double py = kH - kMB - (kH - kMT - kMB) * i / 4.0;
        s += "<text x=\"" + std::to_string(kML - 8) + "\" y=\"" + num(py + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(fy) +
             "</text>\n";
    }
    s += "<text x=\"" + std::to_string((kML + kW - kMR) / 2) + "\" y=\"" +
         std::to_string(kH - 10) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + xl +
         "</text>\n";
    s += "<text x=\"16\" y=\"" + std::to_string((kMT + kH - kMB) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " +
         std::to_string((kMT + kH - kMB) / 2) + ")\">" + yl + "</text>\n";
}

double map_x(double v, const Axis& ax) {
    return kML + (v - ax.lo) / (ax.hi - ax.lo) * (kW - kML - kMR);
}
double map_y(double v, const Axis& ay) {
    return kH - kMB - (v - ay.lo) / (ay.hi - ay.lo) * (kH - kMT - kMB);
}

}  // namespace

std::string svg_line_chart(const std::vector<Series>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label) {
    Axis ax, ay;
    ax.init();
    ay.init();
    for (const auto& s : series) {
        for (double v : s.x) ax.grow(v);
        for (double v : s.y) ay.grow(v);
    }
    ax.finish();
    ay.finish();

    std::string s = svg_header(title);
    axes(s, ax, ay, x_label, y_label);
    int li = 0;
    for (const auto& ser : series) {
        std::string pts;
        for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
            if (!std::isfinite(ser.x[i]) || !std::isfinite(ser.y[i])) continue;
            pts += num(map_x(ser.x[i], ax)) + "," + num(map_y(ser.y[i], ay)) + " ";
        }
        s += "<polyline fill=\"none\" stroke=\"" + ser.color +
             "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        if (!ser.label.empty()) {
            s += "<text x=\"" + std::to_string(kW - kMR - 6) + "\" y=\"" +
                 std::to_string(kMT + 16 * (li + 1)) +
                 "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" +
                 ser.color + "\">" + ser.label + "</text>\n";
        }
        ++li;
    }
    s += "</svg>\n";
    return s;
}

std::string svg_heatmap(const std::vector<double>& grid_x, const std::vector<double>& grid_y,
                        const std::vector<double>& values, const std::string& title,
                        const std::string& x_label, const std::string& y_label) {
    Axis ax, ay;
    ax.init();
    ay.init();
    for (double v : grid_x) ax.grow(v);
    for (double v : grid_y) ay.grow(v);
    ax.finish();
    ay.finish();

    double vmax = 0;
    for (double v : values)
        if (std::isfinite(v)) vmax = std::max(vmax, std::fabs(v));
    if (vmax == 0) vmax = 1;

    const std::size_t nx = grid_x.size(), ny = grid_y.size();
    auto val = [&](std::size_t i, std::size_t j) { return values[i * ny + j]; };

    std::string s = svg_header(title);
    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
            const double v = val(i, j);
            if (!std::isfinite(v)) continue;
            // blue (negative) .. white (0) .. red (positive)
            const double t = std::clamp(v / vmax, -1.0, 1.0);
            int r = 255, g = 255, b = 255;
            if (t >= 0) {
                g = b = static_cast<int>(255 * (1 - t));
            } else {
                r = g = static_cast<int>(255 * (1 + t));
            }
            const double x0 = map_x(i > 0 ? 0.5 * (grid_x[i - 1] + grid_x[i]) : grid_x[0], ax);
            const double x1 =
                map_x(i + 1 < nx ? 0.5 * (grid_x[i] + grid_x[i + 1]) : grid_x[nx - 1], ax);
            const double y0 = map_y(j > 0 ? 0.5 * (grid_y[j - 1] + grid_y[j]) : grid_y[0], ay);
            const double y1 =
                map_y(j + 1 < ny ? 0.5 * (grid_y[j] + grid_y[j + 1]) : grid_y[ny - 1], ay);
            char color[16];
            std::snprintf(color, sizeof color, "#%02x%02x%02x", r, g, b);
            s += "<rect x=\"" + num(std::min(x0, x1)) + "\" y=\"" + num(std::min(y0, y1)) +
                 "\" width=\"" + num(std::fabs(x1 - x0)) + "\" height=\"" +
                 num(std::fabs(y1 - y0)) + "\" fill=\"" + color + "\"/>\n";
        }
    }

    // zero contour by marching squares on the cell corners
    std::string contour;
    auto interp = [](double a, double b) { return a / (a - b); };
    for (std::size_t i = 0; i + 1 < nx; ++i) {
        for (std::size_t j = 0; j + 1 < ny; ++j) {
            const double v00 = val(i, j), v10 = val(i + 1, j), v01 = val(i, j + 1),
                         v11 = val(i + 1, j + 1);
            if (!std::isfinite(v00) || !std::isfinite(v10) || !std::isfinite(v01) ||
                !std::isfinite(v11))
                continue;
            std::vector<std::pair<double, double>> hits;
            if ((v00 < 0) != (v10 < 0))
                hits.push_back({grid_x[i] + interp(v00, v10) * (grid_x[i + 1] - grid_x[i]),
                                grid_y[j]});
            if ((v01 < 0) != (v11 < 0))
                hits.push_back({grid_x[i] + interp(v01, v11) * (grid_x[i + 1] - grid_x[i]),
                                grid_y[j + 1]});
            if ((v00 < 0) != (v01 < 0))
                hits.push_back({grid_x[i],
                                grid_y[j] + interp(v00, v01) * (grid_y[j + 1] - grid_y[j])});
            if ((v10 < 0) != (v11 < 0))
                hits.push_back({grid_x[i + 1],
                                grid_y[j] + interp(v10, v11) * (grid_y[j + 1] - grid_y[j])});
            if (hits.size() >= 2) {
                contour += "<line x1=\"" + num(map_x(hits[0].first, ax)) + "\" y1=\"" +
                           num(map_y(hits[0].second, ay)) + "\" x2=\"" +
                           num(map_x(hits[1].first, ax)) + "\" y2=\"" +
                           num(map_y(hits[1].second, ay)) +
                           "\" stroke=\"black\" stroke-width=\"1.4\"/>\n";
            }
        }
    }
    s += contour;
    axes(s, ax, ay, x_label, y_label);
    s += "</svg>\n";
    return s;
}

}  // namespace ratekit::report
