#include "tsk/tsdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tsk/errors.hpp"

namespace tsk {

TimeSeries::TimeSeries(std::string id, std::vector<double> timestamps, Eigen::MatrixXd values)
    : id_(std::move(id)), timestamps_(std::move(timestamps)), values_(std::move(values)) {
    if (timestamps_.empty()) throw FormatError("series '" + id_ + "': length must be >= 1");
    if (values_.cols() < 1) throw FormatError("series '" + id_ + "': channel count must be >= 1");
    if (static_cast<Eigen::Index>(timestamps_.size()) != values_.rows())
        throw FormatError("series '" + id_ + "': " + std::to_string(timestamps_.size()) +
                          " timestamps but " + std::to_string(values_.rows()) + " value rows");
    for (std::size_t i = 0; i < timestamps_.size(); ++i) {
        if (!std::isfinite(timestamps_[i]))
            throw FormatError("series '" + id_ + "': non-finite timestamp");
        if (i > 0 && timestamps_[i] < timestamps_[i - 1])
            throw FormatError("series '" + id_ + "': timestamps must be ascending");
    }
    if (!values_.allFinite()) throw FormatError("series '" + id_ + "': non-finite value");
}

TimeSeries TimeSeries::select(std::span<const Eigen::Index> idx) const {
    std::vector<double> ts;
    ts.reserve(idx.size());
    Eigen::MatrixXd vals(static_cast<Eigen::Index>(idx.size()), values_.cols());
    Eigen::Index r = 0;
    for (Eigen::Index i : idx) {
        if (i < 0 || i >= length())
            throw ConfigError("series '" + id_ + "': index " + std::to_string(i) + " out of range");
        ts.push_back(timestamps_[static_cast<std::size_t>(i)]);
        vals.row(r++) = values_.row(i);
    }
    return TimeSeries(id_, std::move(ts), std::move(vals));
}

TimeSeries TimeSeries::head(Eigen::Index n) const {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    return select(idx);
}

TimeSeries TimeSeries::tail(Eigen::Index n) const {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = length() - n + i;
    return select(idx);
}

Eigen::Index Dataset::channels() const {
    if (series.empty()) throw FormatError("empty dataset has no channel count");
    return series.front().channels();
}

void Dataset::validate() const {
    if (series.empty()) throw FormatError("dataset contains no series");
    const Eigen::Index d = series.front().channels();
    for (const auto& s : series)
        if (s.channels() != d)
            throw FormatError("series '" + s.id() + "' has " + std::to_string(s.channels()) +
                              " channels, expected " + std::to_string(d));
    if (!labels.empty() && labels.size() != series.size())
        throw FormatError("labels do not align with series: " + std::to_string(labels.size()) +
                          " vs " + std::to_string(series.size()));
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.series.reserve(idx.size());
    for (std::size_t i : idx) {
        out.series.push_back(series.at(i));
        if (has_labels()) out.labels.push_back(labels.at(i));
    }
    return out;
}

bool Dataset::shared_grid() const {
    if (series.empty()) return false;
    const auto& t0 = series.front().timestamps();
    for (const auto& s : series)
        if (s.timestamps() != t0) return false;
    return true;
}

namespace {

double parse_real(std::string_view tok, const std::string& context) {
    double out = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw FormatError(context + ": cannot parse '" + std::string(tok) + "' as a number");
    return out;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = line.find(sep, pos);
        if (next == std::string_view::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

}  // namespace

Dataset load_ucr_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");

    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    std::size_t expected_fields = 0;
    char sep = '\t';
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (ds.series.empty()) {
            // Delimiter autodetected from the first data line.
            sep = line.find('\t') != std::string::npos ? '\t' : ',';
        }
        auto fields = split_fields(line, sep);
        if (fields.size() < 2)
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": expected a label and at least one value");
        if (expected_fields == 0) {
            expected_fields = fields.size();
        } else if (fields.size() != expected_fields) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": ragged row with " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(expected_fields));
        }
        const std::size_t d_len = fields.size() - 1;
        std::vector<double> t(d_len);
        Eigen::MatrixXd vals(static_cast<Eigen::Index>(d_len), 1);
        for (std::size_t i = 0; i < d_len; ++i) {
            t[i] = static_cast<double>(i);
            vals(static_cast<Eigen::Index>(i), 0) =
                parse_real(fields[i + 1], path.string() + ":" + std::to_string(lineno));
        }
        std::string id = path.stem().string() + "#" + std::to_string(ds.series.size());
        ds.series.emplace_back(std::move(id), std::move(t), std::move(vals));
        ds.labels.emplace_back(fields[0]);
    }
    if (ds.series.empty()) throw FormatError(path.string() + ": empty dataset");
    ds.validate();
    return ds;
}

Dataset load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");

    Dataset ds;
    bool any_label = false;
    std::string line;
    std::size_t lineno = 0;
    Eigen::Index d = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!rec.is_object() || !rec.contains("t") || !rec.contains("v"))
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": record must contain 't' and 'v'");
        std::string id = rec.value("id", "line" + std::to_string(lineno));
        auto t = rec.at("t").get<std::vector<double>>();
        const auto& v = rec.at("v");
        if (!v.is_array())
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": 'v' must be an array");
        if (t.size() != v.size())
            throw FormatError("record '" + id + "': " + std::to_string(t.size()) +
                              " timestamps but " + std::to_string(v.size()) + " value rows");
        for (std::size_t i = 1; i < t.size(); ++i)
            if (t[i] < t[i - 1])
                throw FormatError("record '" + id + "': timestamps must be ascending");

        Eigen::Index rec_d = 0;
        Eigen::MatrixXd vals;
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto row = v[i].get<std::vector<double>>();
            if (i == 0) {
                rec_d = static_cast<Eigen::Index>(row.size());
                if (rec_d == 0)
                    throw FormatError("record '" + id + "': empty value row");
                vals.resize(static_cast<Eigen::Index>(v.size()), rec_d);
            } else if (static_cast<Eigen::Index>(row.size()) != rec_d) {
                throw FormatError("record '" + id + "': inconsistent row widths");
            }
            for (Eigen::Index c = 0; c < rec_d; ++c)
                vals(static_cast<Eigen::Index>(i), c) = row[static_cast<std::size_t>(c)];
        }
        if (d < 0) {
            d = rec_d;  // channel count inferred from the first record
        } else if (rec_d != d) {
            throw FormatError("record '" + id + "': " + std::to_string(rec_d) +
                              " channels, expected " + std::to_string(d));
        }
        ds.series.emplace_back(std::move(id), std::move(t), std::move(vals));
        if (rec.contains("label") && !rec.at("label").is_null()) {
            any_label = true;
            ds.labels.push_back(rec.at("label").is_string()
                                    ? rec.at("label").get<std::string>()
                                    : rec.at("label").dump());
        } else {
            ds.labels.emplace_back();
        }
    }
    if (ds.series.empty()) throw FormatError(path.string() + ": empty dataset");
    if (!any_label) ds.labels.clear();
    ds.validate();
    return ds;
}

void write_jsonl(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    for (std::size_t i = 0; i < ds.series.size(); ++i) {
        const TimeSeries& s = ds.series[i];
        nlohmann::ordered_json rec;
        rec["id"] = s.id();
        if (ds.has_labels()) rec["label"] = ds.labels[i];
        rec["t"] = s.timestamps();
        auto rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < s.length(); ++r) {
            auto row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < s.channels(); ++c) row.push_back(s.values()(r, c));
            rows.push_back(std::move(row));
        }
        rec["v"] = std::move(rows);
        out << rec.dump() << '\n';
    }
}

SeriesSplit split_forecast(const Dataset& ds, Eigen::Index n_test_timestamps) {
    if (n_test_timestamps < 1) throw ConfigError("n_test_timestamps must be >= 1");
    SeriesSplit split;
    split.train_time.reserve(ds.size());
    split.test_time.reserve(ds.size());
    for (const auto& s : ds.series) {
        if (s.length() <= n_test_timestamps)
            throw ConfigError("series '" + s.id() + "' has length " + std::to_string(s.length()) +
                              ", too short for " + std::to_string(n_test_timestamps) +
                              " test timestamps");
        std::vector<Eigen::Index> tr(static_cast<std::size_t>(s.length() - n_test_timestamps));
        std::vector<Eigen::Index> te(static_cast<std::size_t>(n_test_timestamps));
        for (std::size_t i = 0; i < tr.size(); ++i) tr[i] = static_cast<Eigen::Index>(i);
        for (std::size_t i = 0; i < te.size(); ++i)
            te[i] = s.length() - n_test_timestamps + static_cast<Eigen::Index>(i);
        split.train_time.push_back(std::move(tr));
        split.test_time.push_back(std::move(te));
    }
    return split;
}

namespace {

void check_split(const Dataset& ds, const SeriesSplit& split) {
    if (split.train_time.size() != ds.size() || split.test_time.size() != ds.size())
        throw ConfigError("split does not align with dataset (" +
                          std::to_string(split.train_time.size()) + " masks vs " +
                          std::to_string(ds.size()) + " series)");
}

}  // namespace

Dataset slice_train_window(const Dataset& ds, const SeriesSplit& split) {
    check_split(ds, split);
    Dataset out;
    out.labels = ds.labels;
    out.series.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        out.series.push_back(ds.series[i].select(split.train_time[i]));
    return out;
}

Dataset slice_test_window(const Dataset& ds, const SeriesSplit& split) {
    check_split(ds, split);
    Dataset out;
    out.labels = ds.labels;
    out.series.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        out.series.push_back(ds.series[i].select(split.test_time[i]));
    return out;
}

Eigen::MatrixXd test_window_values(const Dataset& ds, const SeriesSplit& split) {
    check_split(ds, split);
    if (ds.series.empty()) throw FormatError("empty dataset");
    const auto k = static_cast<Eigen::Index>(split.test_time.front().size());
    const Eigen::Index d = ds.channels();
    for (const auto& m : split.test_time)
        if (static_cast<Eigen::Index>(m.size()) != k)
            throw FormatError("inconsistent test windows across series");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(ds.size()), k * d);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const TimeSeries& s = ds.series[i];
        for (Eigen::Index c = 0; c < d; ++c)
            for (Eigen::Index j = 0; j < k; ++j)
                out(static_cast<Eigen::Index>(i), c * k + j) =
                    s.values()(split.test_time[i][static_cast<std::size_t>(j)], c);
    }
    return out;
}

}  // namespace tsk
