#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mtp/dataset.hpp"
#include "mtp/error.hpp"

namespace mtp {

// Per-column min-max statistics, computed on a training split and reused for
// the matching test split so both land in the same [0,1] box.  Columns whose
// observed values are all in {0,1} (one-hot indicators) pass through.
struct NormStats {
    Vec col_lo;
    Vec col_hi;
    std::vector<char> passthrough;

    static NormStats from_columns(const std::vector<double>& rows, std::size_t n, std::size_t d) {
        NormStats s;
        s.col_lo.assign(d, 0.0);
        s.col_hi.assign(d, 1.0);
        s.passthrough.assign(d, 1);
        for (std::size_t j = 0; j < d; ++j) {
            double lo = rows[j], hi = rows[j];
            bool binary = true;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = rows[i * d + j];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                if (v != 0.0 && v != 1.0) binary = false;
            }
            s.col_lo[j] = lo;
            s.col_hi[j] = hi;
            s.passthrough[j] = binary ? 1 : 0;
        }
        return s;
    }

    void apply(std::vector<double>& rows, std::size_t n, std::size_t d) const {
        for (std::size_t j = 0; j < d; ++j) {
            if (passthrough[j]) continue;
            const double span = col_hi[j] - col_lo[j];
            for (std::size_t i = 0; i < n; ++i) {
                double& v = rows[i * d + j];
                v = span > 0.0 ? (v - col_lo[j]) / span : 0.0;
                v = std::clamp(v, 0.0, 1.0);
            }
        }
    }
};

using LabelMap = std::map<std::string, int>;

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& tok, const char* where, std::size_t line_no) {
    const std::string t = trim(tok);
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw MtpError("data_parse", std::string(where) + ": malformed numeric value '" + t +
                                         "' at line " + std::to_string(line_no));
    return v;
}

inline int map_label(const LabelMap& map, const std::string& raw, std::size_t line_no) {
    auto it = map.find(trim(raw));
    if (it == map.end())
        throw MtpError("label_mapping", "unmappable label '" + trim(raw) + "' at line " +
                                            std::to_string(line_no));
    if (it->second != 1 && it->second != -1)
        throw MtpError("label_mapping", "label map must produce +1 or -1");
    return it->second;
}

inline std::uint32_t read_be_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw MtpError("data_parse", std::string("idx: truncated ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

// CSV with a header row; `label_column` names the label, every other column is
// a numeric feature.  Labels are mapped through the declared `label_map`.
// When `stats` is null, min-max statistics are computed from this file (and
// returned through `stats_out` if given); otherwise the provided statistics
// are applied, so train/test share one scaling.
inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        const LabelMap& label_map, bool normalize = true,
                        const NormStats* stats = nullptr, NormStats* stats_out = nullptr) {
    std::ifstream in(path);
    if (!in) throw MtpError("io", "cannot open '" + path + "'");

    std::string header;
    if (!std::getline(in, header)) throw MtpError("data_parse", "empty dataset: '" + path + "'");
    auto cols = detail::split(detail::trim(header), ',');
    std::optional<std::size_t> label_idx;
    for (std::size_t j = 0; j < cols.size(); ++j)
        if (detail::trim(cols[j]) == label_column) label_idx = j;
    if (!label_idx)
        throw MtpError("data_parse", "label column '" + label_column + "' not found in header");

    const std::size_t d = cols.size() - 1;
    std::vector<double> rows;
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto toks = detail::split(line, ',');
        if (toks.size() != cols.size())
            throw MtpError("data_parse", "malformed row at line " + std::to_string(line_no) +
                                             ": expected " + std::to_string(cols.size()) +
                                             " fields, got " + std::to_string(toks.size()));
        for (std::size_t j = 0; j < toks.size(); ++j) {
            if (j == *label_idx) continue;
            rows.push_back(detail::parse_double(toks[j], "csv", line_no));
        }
        labels.push_back(detail::map_label(label_map, toks[*label_idx], line_no));
    }
    if (labels.empty()) throw MtpError("data_parse", "empty dataset: '" + path + "'");

    if (normalize) {
        NormStats local;
        const NormStats* use = stats;
        if (!use) {
            local = NormStats::from_columns(rows, labels.size(), d);
            use = &local;
        }
        use->apply(rows, labels.size(), d);
        if (stats_out) *stats_out = *use;
    }

    Dataset ds;
    ds.features = std::move(rows);
    ds.labels = std::move(labels);
    ds.domain = FeatureDomain::unit_box(d);
    if (!normalize) {
        // without normalization the box must still cover the data
        for (std::size_t i = 0; i < ds.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) {
                ds.domain.lo[j] = std::min(ds.domain.lo[j], ds.features[i * d + j]);
                ds.domain.hi[j] = std::max(ds.domain.hi[j], ds.features[i * d + j]);
            }
    }
    ds.validate();
    return ds;
}

// Sparse "label idx:value ..." rows with 1-based indices and a declared
// dimension; absent indices are zero.  Labels may be mapped; by default the
// raw label must already read as +1/-1 ("+1", "1", "-1").
inline Dataset load_libsvm(const std::string& path, std::size_t dim,
                           const LabelMap* label_map = nullptr) {
    std::ifstream in(path);
    if (!in) throw MtpError("io", "cannot open '" + path + "'");

    std::vector<double> rows;
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::istringstream ls(t);
        std::string label_tok;
        ls >> label_tok;
        int y = 0;
        if (label_map) {
            y = detail::map_label(*label_map, label_tok, line_no);
        } else {
            if (label_tok == "+1" || label_tok == "1")
                y = 1;
            else if (label_tok == "-1")
                y = -1;
            else
                throw MtpError("label_mapping", "unmappable label '" + label_tok + "' at line " +
                                                    std::to_string(line_no));
        }
        Vec x(dim, 0.0);
        std::string pair;
        while (ls >> pair) {
            const auto colon = pair.find(':');
            if (colon == std::string::npos)
                throw MtpError("data_parse", "libsvm: malformed pair '" + pair + "' at line " +
                                                 std::to_string(line_no));
            const std::size_t idx =
                static_cast<std::size_t>(detail::parse_double(pair.substr(0, colon), "libsvm", line_no));
            if (idx < 1 || idx > dim)
                throw MtpError("dimension_mismatch", "libsvm: index " + std::to_string(idx) +
                                                         " outside 1.." + std::to_string(dim) +
                                                         " at line " + std::to_string(line_no));
            x[idx - 1] = detail::parse_double(pair.substr(colon + 1), "libsvm", line_no);
        }
        rows.insert(rows.end(), x.begin(), x.end());
        labels.push_back(y);
    }
    if (labels.empty()) throw MtpError("data_parse", "empty dataset: '" + path + "'");

    Dataset ds;
    ds.features = std::move(rows);
    ds.labels = std::move(labels);
    ds.domain = FeatureDomain::unit_box(dim);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            ds.domain.lo[j] = std::min(ds.domain.lo[j], ds.features[i * dim + j]);
            ds.domain.hi[j] = std::max(ds.domain.hi[j], ds.features[i * dim + j]);
        }
    ds.validate();
    return ds;
}

// IDX image/label pair (the MNIST binary layout, big-endian dimensions).
// Keeps only the two digits given and maps digit_pos -> +1, digit_neg -> -1;
// pixels are scaled by 1/255 into the unit box.
inline Dataset load_idx_pair(const std::string& images_path, const std::string& labels_path,
                             int digit_pos, int digit_neg) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw MtpError("io", "cannot open '" + images_path + "'");
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw MtpError("io", "cannot open '" + labels_path + "'");

    if (detail::read_be_u32(imgs, "image magic") != 0x00000803u)
        throw MtpError("data_parse", "idx: bad image magic number");
    const std::uint32_t n_img = detail::read_be_u32(imgs, "image count");
    const std::uint32_t rows = detail::read_be_u32(imgs, "rows");
    const std::uint32_t cols = detail::read_be_u32(imgs, "cols");
    if (detail::read_be_u32(labs, "label magic") != 0x00000801u)
        throw MtpError("data_parse", "idx: bad label magic number");
    const std::uint32_t n_lab = detail::read_be_u32(labs, "label count");
    if (n_img != n_lab) throw MtpError("data_parse", "idx: image/label count mismatch");

    const std::size_t d = std::size_t(rows) * cols;
    std::vector<unsigned char> pix(d);
    std::vector<double> feat;
    std::vector<int> labels;
    for (std::uint32_t i = 0; i < n_img; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(pix.data()), std::streamsize(d)))
            throw MtpError("data_parse", "idx: truncated image data");
        char lab = 0;
        if (!labs.read(&lab, 1)) throw MtpError("data_parse", "idx: truncated label data");
        const int digit = static_cast<unsigned char>(lab);
        if (digit != digit_pos && digit != digit_neg) continue;
        for (std::size_t j = 0; j < d; ++j) feat.push_back(pix[j] / 255.0);
        labels.push_back(digit == digit_pos ? 1 : -1);
    }
    if (labels.empty()) throw MtpError("data_parse", "empty dataset: no rows match the digit pair");

    Dataset ds;
    ds.features = std::move(feat);
    ds.labels = std::move(labels);
    ds.domain = FeatureDomain::unit_box(d);
    ds.validate();
    return ds;
}

}  // namespace mtp
