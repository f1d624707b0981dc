#pragma once

#include <string>
#include <vector>

namespace ratekit::report {

/// Order-preserving JSON value with fixed 17-significant-digit number
/// formatting, so identical runs produce byte-identical reports.
class JValue {
public:
    static JValue object() { return JValue(Kind::Object); }
    static JValue array() { return JValue(Kind::Array); }
    static JValue null() { return JValue(Kind::Null); }
    JValue() : kind_(Kind::Null) {}
    JValue(double v) : kind_(Kind::Number), num_(v) {}
    JValue(int v) : kind_(Kind::Number), num_(v) {}
    JValue(long v) : kind_(Kind::Number), num_(static_cast<double>(v)) {}
    JValue(std::size_t v) : kind_(Kind::Number), num_(static_cast<double>(v)) {}
    JValue(bool v) : kind_(Kind::Bool), bool_(v) {}
    JValue(const char* v) : kind_(Kind::String), str_(v) {}
    JValue(std::string v) : kind_(Kind::String), str_(std::move(v)) {}
    JValue(const std::vector<double>& v) : kind_(Kind::Array) {
        for (double x : v) arr_.emplace_back(x);
    }

    JValue& set(const std::string& key, JValue v);
    JValue& push(JValue v);
    bool is_null() const { return kind_ == Kind::Null; }

    std::string dump(int indent = 2) const;

private:
    enum class Kind { Null, Bool, Number, String, Array, Object };
    explicit JValue(Kind k) : kind_(k) {}
    void write(std::string& out, int indent, int depth) const;

    Kind kind_;
    double num_ = 0;
    bool bool_ = false;
    std::string str_;
    std::vector<JValue> arr_;
    std::vector<std::pair<std::string, JValue>> obj_;
};

std::string format_double(double v);

/// Writes text to a file, creating parent directories; throws on failure.
void write_file(const std::string& path, const std::string& content);

// ---------------------------------------------------------------------------
// minimal SVG renderings (polyline charts and heat maps, no external deps)
// ---------------------------------------------------------------------------

struct Series {
    std::vector<double> x, y;
    std::string color = "#1f6fb2";
    std::string label;
};

/// Polyline chart with axes and tick labels.
std::string svg_line_chart(const std::vector<Series>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label);

/// Heat map over a rectangular grid with a zero contour (marching squares);
/// NaN cells are left blank.
std::string svg_heatmap(const std::vector<double>& grid_x, const std::vector<double>& grid_y,
                        const std::vector<double>& values_row_major, const std::string& title,
                        const std::string& x_label, const std::string& y_label);

}  // namespace ratekit::report
