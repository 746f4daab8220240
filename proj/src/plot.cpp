#include "f2r/eval/plot.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

#include "f2r/core/errors.hpp"
#include "f2r/core/image_io.hpp"

namespace f2r {

namespace {

// 5-row ASCII-art glyphs, enough for arm labels and numbers.
const std::map<char, std::array<const char*, 5>>& glyphs() {
    static const std::map<char, std::array<const char*, 5>> g = {
        {'0', {"###", "# #", "# #", "# #", "###"}}, {'1', {" # ", "## ", " # ", " # ", "###"}},
        {'2', {"###", "  #", "###", "#  ", "###"}}, {'3', {"###", "  #", "###", "  #", "###"}},
        {'4', {"# #", "# #", "###", "  #", "  #"}}, {'5', {"###", "#  ", "###", "  #", "###"}},
        {'6', {"###", "#  ", "###", "# #", "###"}}, {'7', {"###", "  #", "  #", "  #", "  #"}},
        {'8', {"###", "# #", "###", "# #", "###"}}, {'9', {"###", "# #", "###", "  #", "###"}},
        {'.', {"   ", "   ", "   ", "   ", " # "}}, {'-', {"   ", "   ", "###", "   ", "   "}},
        {'=', {"   ", "###", "   ", "###", "   "}}, {'_', {"   ", "   ", "   ", "   ", "###"}},
        {'/', {"  #", "  #", " # ", "#  ", "#  "}}, {' ', {"   ", "   ", "   ", "   ", "   "}},
        {'a', {"   ", "###", "# #", "# #", "###"}}, {'b', {"#  ", "###", "# #", "# #", "###"}},
        {'c', {"   ", "###", "#  ", "#  ", "###"}}, {'d', {"  #", "###", "# #", "# #", "###"}},
        {'e', {"###", "# #", "###", "#  ", "###"}}, {'f', {" ##", " # ", "###", " # ", " # "}},
        {'g', {"###", "# #", "###", "  #", "###"}}, {'h', {"#  ", "#  ", "###", "# #", "# #"}},
        {'i', {" # ", "   ", " # ", " # ", " # "}}, {'j', {"  #", "   ", "  #", "  #", "## "}},
        {'k', {"#  ", "# #", "## ", "## ", "# #"}}, {'l', {" # ", " # ", " # ", " # ", " ##"}},
        {'m', {"   ", "###", "###", "# #", "# #"}}, {'n', {"   ", "## ", "# #", "# #", "# #"}},
        {'o', {"   ", "###", "# #", "# #", "###"}}, {'p', {"###", "# #", "###", "#  ", "#  "}},
        {'q', {"###", "# #", "###", "  #", "  #"}}, {'r', {"   ", "## ", "#  ", "#  ", "#  "}},
        {'s', {" ##", "#  ", " # ", "  #", "## "}}, {'t', {" # ", "###", " # ", " # ", " ##"}},
        {'u', {"   ", "# #", "# #", "# #", "###"}}, {'v', {"   ", "# #", "# #", "# #", " # "}},
        {'w', {"   ", "# #", "# #", "###", "###"}}, {'x', {"   ", "# #", " # ", " # ", "# #"}},
        {'y', {"# #", "# #", "###", "  #", "###"}}, {'z', {"###", "  #", " # ", "#  ", "###"}},
        {'T', {"###", " # ", " # ", " # ", " # "}}, {'F', {"###", "#  ", "###", "#  ", "#  "}},
        {'D', {"## ", "# #", "# #", "# #", "## "}}, {'A', {"###", "# #", "###", "# #", "# #"}},
        {'M', {"# #", "###", "###", "# #", "# #"}}, {'P', {"###", "# #", "###", "#  ", "#  "}},
        {'S', {"###", "#  ", "###", "  #", "###"}}, {'N', {"# #", "###", "###", "###", "# #"}},
        {'R', {"###", "# #", "## ", "# #", "# #"}}, {'B', {"## ", "###", "## ", "# #", "###"}},
    };
    return g;
}

struct Canvas {
    Tensor img;
    Canvas(int w, int h) : img({3, h, w}, 1.0f) {}
    void px(int x, int y, float r, float g, float b) {
        if (x < 0 || y < 0 || x >= img.dim(2) || y >= img.dim(1)) return;
        img.at(0, y, x) = r;
        img.at(1, y, x) = g;
        img.at(2, y, x) = b;
    }
    void rect(int x0, int y0, int x1, int y1, float r, float g, float b) {
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) px(x, y, r, g, b);
    }
    void hline(int x0, int x1, int y, float v) { rect(x0, y, x1, y, v, v, v); }
    void vline(int x, int y0, int y1, float v) { rect(x, y0, x, y1, v, v, v); }
    void text(int x, int y, const std::string& s, int scale = 1) {
        int cx = x;
        const auto& g = glyphs();
        for (char ch : s) {
            auto it = g.find(ch);
            if (it == g.end()) it = g.find(static_cast<char>(std::tolower(ch)));
            if (it != g.end()) {
                for (int ry = 0; ry < 5; ++ry)
                    for (int rx = 0; rx < 3; ++rx)
                        if (it->second[static_cast<std::size_t>(ry)][rx] == '#')
                            rect(cx + rx * scale, y + ry * scale, cx + rx * scale + scale - 1,
                                 y + ry * scale + scale - 1, 0.1f, 0.1f, 0.1f);
            }
            cx += 4 * scale;
        }
    }
    void line(double x0, double y0, double x1, double y1, float r, float g, float b) {
        const int n = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
        for (int i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) / n;
            px(static_cast<int>(std::lround(x0 + t * (x1 - x0))),
               static_cast<int>(std::lround(y0 + t * (y1 - y0))), r, g, b);
        }
    }
};

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

void render_bar_chart(const std::string& path, const std::string& title,
                      const std::vector<std::string>& labels, const std::vector<double>& values,
                      int width, int height) {
    if (labels.size() != values.size() || labels.empty())
        throw InputError("bar chart: label/value mismatch");
    Canvas c(width, height);
    const int ml = 50, mr = 15, mt = 30, mb = 60;
    double vmax = *std::max_element(values.begin(), values.end());
    double vmin = *std::min_element(values.begin(), values.end());
    if (vmax == vmin) vmax = vmin + 1.0;
    const double lo = vmin - 0.15 * (vmax - vmin), hi = vmax + 0.1 * (vmax - vmin);
    const int ph = height - mt - mb, pw = width - ml - mr;
    auto ypix = [&](double v) { return mt + static_cast<int>((hi - v) / (hi - lo) * ph); };

    c.text(ml, 8, title);
    c.vline(ml, mt, mt + ph, 0.0f);
    c.hline(ml, ml + pw, mt + ph, 0.0f);
    for (int i = 0; i <= 4; ++i) {
        const double v = lo + (hi - lo) * i / 4.0;
        c.hline(ml - 3, ml, ypix(v), 0.0f);
        c.text(4, ypix(v) - 2, fmt2(v));
    }
    const int n = static_cast<int>(values.size());
    const int bw = std::max(8, pw / (2 * n));
    for (int i = 0; i < n; ++i) {
        const int cx = ml + pw * (2 * i + 1) / (2 * n);
        const int y1 = mt + ph - 1;
        const int y0 = std::min(y1, ypix(values[static_cast<std::size_t>(i)]));
        c.rect(cx - bw / 2, y0, cx + bw / 2, y1, 0.30f, 0.45f, 0.75f);
        c.text(cx - bw / 2, y0 - 10, fmt2(values[static_cast<std::size_t>(i)]));
        c.text(cx - 2 * static_cast<int>(labels[static_cast<std::size_t>(i)].size()),
               mt + ph + 8, labels[static_cast<std::size_t>(i)]);
    }
    write_image(path, c.img, 8);
}

void render_line_chart(const std::string& path, const std::string& title,
                       const std::vector<PlotSeries>& series, int width, int height) {
    if (series.empty()) throw InputError("line chart: no series");
    Canvas c(width, height);
    const int ml = 50, mr = 15, mt = 30, mb = 40;
    double vmin = 1e300, vmax = -1e300;
    std::size_t nmax = 0;
    for (const auto& s : series) {
        nmax = std::max(nmax, s.values.size());
        for (double v : s.values) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    }
    if (nmax < 2) throw InputError("line chart: series too short");
    if (vmax == vmin) vmax = vmin + 1.0;
    const double lo = vmin - 0.1 * (vmax - vmin), hi = vmax + 0.1 * (vmax - vmin);
    const int ph = height - mt - mb, pw = width - ml - mr;
    auto ypix = [&](double v) { return mt + (hi - v) / (hi - lo) * ph; };
    auto xpix = [&](std::size_t i, std::size_t n) {
        return ml + static_cast<double>(i) / (n - 1) * pw;
    };

    c.text(ml, 8, title);
    c.vline(ml, mt, mt + ph, 0.0f);
    c.hline(ml, ml + pw, mt + ph, 0.0f);
    for (int i = 0; i <= 4; ++i) {
        const double v = lo + (hi - lo) * i / 4.0;
        c.hline(ml - 3, ml, static_cast<int>(ypix(v)), 0.0f);
        c.text(4, static_cast<int>(ypix(v)) - 2, fmt2(v));
    }
    const float palette[6][3] = {{0.85f, 0.30f, 0.25f}, {0.25f, 0.45f, 0.80f},
                                 {0.20f, 0.65f, 0.35f}, {0.80f, 0.60f, 0.15f},
                                 {0.55f, 0.30f, 0.70f}, {0.15f, 0.15f, 0.15f}};
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& sr = series[s];
        const auto* col = palette[s % 6];
        for (std::size_t i = 0; i + 1 < sr.values.size(); ++i)
            c.line(xpix(i, sr.values.size()), ypix(sr.values[i]), xpix(i + 1, sr.values.size()),
                   ypix(sr.values[i + 1]), col[0], col[1], col[2]);
        const int ly = mt + 4 + 10 * static_cast<int>(s);
        c.rect(width - mr - 70, ly, width - mr - 60, ly + 4, col[0], col[1], col[2]);
        c.text(width - mr - 56, ly - 1, sr.label);
    }
    write_image(path, c.img, 8);
}

}  // namespace f2r
