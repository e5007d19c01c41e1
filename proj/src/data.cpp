#include "ckan/data.hpp"

#include "ckan/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

namespace ckan {

DatasetKind dataset_kind_from_string(const std::string& name) {
    if (name == "unsw_nb15") return DatasetKind::UnswNb15;
    if (name == "bot_iot") return DatasetKind::BotIot;
    if (name == "gas_pipeline") return DatasetKind::GasPipeline;
    if (name == "generic_csv") return DatasetKind::GenericCsv;
    throw ArgumentError("unknown dataset kind '" + name +
                        "' (expected unsw_nb15 | bot_iot | gas_pipeline | generic_csv)");
}

std::string dataset_kind_to_string(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::UnswNb15: return "unsw_nb15";
    case DatasetKind::BotIot: return "bot_iot";
    case DatasetKind::GasPipeline: return "gas_pipeline";
    case DatasetKind::GenericCsv: return "generic_csv";
    }
    return "generic_csv";
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool is_missing_token(const std::string& raw) {
    std::string t = trim(raw);
    if (t.empty()) return true;
    std::string low;
    low.reserve(t.size());
    for (char c : t) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return low == "nan";
}

// True iff the trimmed cell parses completely to a finite double.
bool parse_finite(const std::string& raw, double& out) {
    std::string t = trim(raw);
    if (t.empty()) return false;
    const char* begin = t.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + t.size()) return false;
    if (!std::isfinite(v)) return false;
    out = v;
    return true;
}

const std::vector<std::string>& unsw_keep_classes() {
    static const std::vector<std::string> keep = {"Normal",  "Fuzzers", "DoS",
                                                  "Exploits", "Generic", "Reconnaissance"};
    return keep;
}

int require_column(const CsvTable& csv, const std::string& name, const char* dataset) {
    int idx = csv.column_index(name);
    if (idx < 0) {
        throw SchemaError(std::string(dataset) + ": missing expected column '" + name + "'");
    }
    return idx;
}

} // namespace

std::size_t ColumnSchema::feature_width() const {
    std::size_t w = 0;
    for (const auto& col : columns) {
        if (col.kind == ColumnKind::Numeric) ++w;
        else if (col.kind == ColumnKind::Categorical) w += col.vocabulary.size();
    }
    return w;
}

int ColumnSchema::label_column() const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].kind == ColumnKind::Label) return static_cast<int>(i);
    }
    return -1;
}

int ColumnSchema::class_index(const std::string& name) const {
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        if (class_names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

RawTable table_from_csv(const CsvTable& csv, DatasetKind kind, const std::string& label_override) {
    RawTable table;
    table.kind = kind;

    std::string label_name;
    std::unordered_set<std::string> drops;
    std::unordered_set<std::string> categorical;

    switch (kind) {
    case DatasetKind::UnswNb15:
        label_name = "attack_cat";
        drops = {"id", "label"};
        categorical = {"proto", "service", "state"};
        require_column(csv, "attack_cat", "unsw_nb15");
        require_column(csv, "proto", "unsw_nb15");
        require_column(csv, "service", "unsw_nb15");
        require_column(csv, "state", "unsw_nb15");
        break;
    case DatasetKind::BotIot:
        label_name = "category";
        drops = {"attack", "subcategory"};
        categorical = {"proto"};
        require_column(csv, "category", "bot_iot");
        require_column(csv, "proto", "bot_iot");
        break;
    case DatasetKind::GasPipeline: {
        label_name = "result";
        static const char* const constant_cols[] = {"rate",     "comm_write_fun", "gain",
                                                    "reset",    "deadband",       "cycletime",
                                                    "crc_rate"};
        for (const char* c : constant_cols) {
            require_column(csv, c, "gas_pipeline");
            drops.insert(c);
        }
        require_column(csv, "result", "gas_pipeline");
        break;
    }
    case DatasetKind::GenericCsv:
        label_name = label_override.empty() ? "label" : label_override;
        require_column(csv, label_name, "generic_csv");
        break;
    }

    const int label_idx = csv.column_index(label_name);
    table.label_name = label_name;

    for (std::size_t c = 0; c < csv.n_cols(); ++c) {
        if (static_cast<int>(c) == label_idx) continue;
        if (drops.count(csv.header[c])) continue;
        table.feature_names.push_back(csv.header[c]);
        ColumnKind k = ColumnKind::Numeric;
        if (categorical.count(csv.header[c])) {
            k = ColumnKind::Categorical;
        } else if (kind == DatasetKind::GenericCsv) {
            // Infer: numeric iff every non-missing cell parses to a finite value.
            for (const auto& cell : csv.columns[c]) {
                double v;
                if (!is_missing_token(cell) && !parse_finite(cell, v)) {
                    k = ColumnKind::Categorical;
                    break;
                }
            }
        }
        table.feature_kinds.push_back(k);
        table.feature_cells.emplace_back();
    }

    // Row filter: UNSW keeps only the six studied classes; empty attack_cat
    // rows are normal traffic in the source files.
    const auto& keep = unsw_keep_classes();
    for (std::size_t r = 0; r < csv.n_rows(); ++r) {
        std::string label = trim(csv.columns[label_idx][r]);
        if (kind == DatasetKind::UnswNb15) {
            if (label.empty()) label = "Normal";
            if (std::find(keep.begin(), keep.end(), label) == keep.end()) continue;
        }
        std::size_t f = 0;
        for (std::size_t c = 0; c < csv.n_cols(); ++c) {
            if (static_cast<int>(c) == label_idx) continue;
            if (drops.count(csv.header[c])) continue;
            table.feature_cells[f].push_back(csv.columns[c][r]);
            ++f;
        }
        table.labels.push_back(std::move(label));
    }
    return table;
}

RawTable load_dataset(const std::string& path, DatasetKind kind,
                      const std::string& label_override) {
    return table_from_csv(read_csv(path), kind, label_override);
}

std::size_t handle_missing(RawTable& table) {
    const std::size_t n = table.n_rows();
    std::vector<char> keep(n, 1);
    std::size_t dropped = 0;
    for (std::size_t r = 0; r < n; ++r) {
        bool ok = !trim(table.labels[r]).empty();
        for (std::size_t c = 0; ok && c < table.n_feature_columns(); ++c) {
            const std::string& cell = table.feature_cells[c][r];
            if (table.feature_kinds[c] == ColumnKind::Numeric) {
                double v;
                ok = parse_finite(cell, v);
            } else {
                ok = !is_missing_token(cell);
            }
        }
        if (!ok) {
            keep[r] = 0;
            ++dropped;
        }
    }
    if (dropped == 0) return 0;
    auto compact = [&](auto& vec) {
        std::size_t w = 0;
        for (std::size_t r = 0; r < n; ++r) {
            if (!keep[r]) continue;
            if (w != r) vec[w] = std::move(vec[r]); // guard against self-move
            ++w;
        }
        vec.resize(w);
    };
    for (auto& col : table.feature_cells) compact(col);
    compact(table.labels);
    return dropped;
}

ColumnSchema fit_schema(const RawTable& table) {
    ColumnSchema schema;
    for (std::size_t c = 0; c < table.n_feature_columns(); ++c) {
        ColumnSpec spec;
        spec.name = table.feature_names[c];
        spec.kind = table.feature_kinds[c];
        if (spec.kind == ColumnKind::Categorical) {
            std::set<std::string> vocab;
            for (const auto& cell : table.feature_cells[c]) vocab.insert(trim(cell));
            spec.vocabulary.assign(vocab.begin(), vocab.end());
        }
        schema.columns.push_back(std::move(spec));
    }
    ColumnSpec label_spec;
    label_spec.name = table.label_name;
    label_spec.kind = ColumnKind::Label;
    schema.columns.push_back(std::move(label_spec));

    std::set<std::string> classes;
    for (const auto& l : table.labels) classes.insert(trim(l));
    schema.class_names.assign(classes.begin(), classes.end());
    return schema;
}

EncodedData encode(const RawTable& table, const ColumnSchema& schema) {
    // The schema's feature specs must line up with the table's columns.
    std::size_t n_feature_specs = 0;
    for (const auto& col : schema.columns) {
        if (col.kind == ColumnKind::Label || col.kind == ColumnKind::Drop) continue;
        if (n_feature_specs >= table.n_feature_columns()) {
            throw SchemaError("encode: schema has more feature columns than the table");
        }
        const std::size_t c = n_feature_specs;
        if (col.name != table.feature_names[c]) {
            throw SchemaError("encode: schema column '" + col.name + "' does not match table column '" +
                              table.feature_names[c] + "'");
        }
        if (col.kind != table.feature_kinds[c]) {
            throw SchemaError("encode: column '" + col.name + "' kind differs between schema and table");
        }
        ++n_feature_specs;
    }
    if (n_feature_specs != table.n_feature_columns()) {
        throw SchemaError("encode: table has more feature columns than the schema");
    }

    EncodedData out;
    const std::size_t n = table.n_rows();
    std::vector<int> row_label(n, -1);
    std::size_t kept = 0;
    for (std::size_t r = 0; r < n; ++r) {
        row_label[r] = schema.class_index(trim(table.labels[r]));
        if (row_label[r] < 0) ++out.unknown_label_rows;
        else ++kept;
    }

    out.features = Matrix(kept, schema.feature_width());
    out.labels.reserve(kept);
    std::size_t w = 0;
    for (std::size_t r = 0; r < n; ++r) {
        if (row_label[r] < 0) continue;
        double* dst = out.features.row_ptr(w);
        std::size_t off = 0;
        std::size_t c = 0;
        for (const auto& col : schema.columns) {
            if (col.kind == ColumnKind::Label || col.kind == ColumnKind::Drop) continue;
            const std::string& cell = table.feature_cells[c][r];
            if (col.kind == ColumnKind::Numeric) {
                double v;
                if (!parse_finite(cell, v)) {
                    throw ArgumentError("encode: unparseable numeric cell '" + cell + "' in column '" +
                                        col.name + "' (run handle_missing first)");
                }
                dst[off++] = v;
            } else {
                const std::string t = trim(cell);
                auto it = std::lower_bound(col.vocabulary.begin(), col.vocabulary.end(), t);
                if (it != col.vocabulary.end() && *it == t) {
                    dst[off + static_cast<std::size_t>(it - col.vocabulary.begin())] = 1.0;
                } else {
                    ++out.unseen_category_cells; // all-zero block
                }
                off += col.vocabulary.size();
            }
            ++c;
        }
        out.labels.push_back(row_label[r]);
        ++w;
    }
    return out;
}

Scaler fit_scaler(const Matrix& pretrain_features) {
    if (pretrain_features.rows == 0 || pretrain_features.cols == 0) {
        throw ArgumentError("fit_scaler: empty input");
    }
    const std::size_t n = pretrain_features.rows, d = pretrain_features.cols;
    Scaler s;
    s.mu.assign(d, 0.0);
    s.sigma.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = pretrain_features.row_ptr(r);
        for (std::size_t c = 0; c < d; ++c) s.mu[c] += row[c];
    }
    for (std::size_t c = 0; c < d; ++c) s.mu[c] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = pretrain_features.row_ptr(r);
        for (std::size_t c = 0; c < d; ++c) {
            const double dlt = row[c] - s.mu[c];
            s.sigma[c] += dlt * dlt;
        }
    }
    for (std::size_t c = 0; c < d; ++c) {
        s.sigma[c] = std::sqrt(s.sigma[c] / static_cast<double>(n));
        if (s.sigma[c] < kSigmaFloor) s.sigma[c] = 1.0;
    }
    return s;
}

Scaler fit_min_max(const Matrix& pretrain_features) {
    if (pretrain_features.rows == 0 || pretrain_features.cols == 0) {
        throw ArgumentError("fit_min_max: empty input");
    }
    const std::size_t n = pretrain_features.rows, d = pretrain_features.cols;
    Scaler s;
    s.mu.assign(pretrain_features.row_ptr(0), pretrain_features.row_ptr(0) + d);
    std::vector<double> hi(s.mu);
    for (std::size_t r = 1; r < n; ++r) {
        const double* row = pretrain_features.row_ptr(r);
        for (std::size_t c = 0; c < d; ++c) {
            s.mu[c] = std::min(s.mu[c], row[c]);
            hi[c] = std::max(hi[c], row[c]);
        }
    }
    s.sigma.resize(d);
    for (std::size_t c = 0; c < d; ++c) {
        s.sigma[c] = hi[c] - s.mu[c];
        if (s.sigma[c] < kSigmaFloor) s.sigma[c] = 1.0;
    }
    return s;
}

Matrix transform(const Scaler& scaler, const Matrix& features) {
    if (features.cols != scaler.mu.size()) {
        throw ShapeError("transform: feature width " + std::to_string(features.cols) +
                         " does not match scaler width " + std::to_string(scaler.mu.size()));
    }
    Matrix out(features.rows, features.cols);
    for (std::size_t r = 0; r < features.rows; ++r) {
        const double* src = features.row_ptr(r);
        double* dst = out.row_ptr(r);
        for (std::size_t c = 0; c < features.cols; ++c) {
            dst[c] = (src[c] - scaler.mu[c]) / scaler.sigma[c];
        }
    }
    return out;
}

SplitRatios split_ratios_for(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::UnswNb15: return {0.80, 0.08};
    case DatasetKind::BotIot: return {0.128, 0.0128};
    case DatasetKind::GasPipeline: return {0.80, 0.08};
    case DatasetKind::GenericCsv: return {0.80, 0.08};
    }
    return {0.80, 0.08};
}

namespace {

// floor() with a nudge absorbing FP jitter in n*ratio products that are exact
// integers in real arithmetic.
std::size_t stable_floor(double x) {
    return static_cast<std::size_t>(std::floor(x + 1e-9));
}

// Largest-remainder apportionment of `total` over per-class quotas n_c*ratio;
// remainder ties go to the lower class index. Never exceeds a class's size.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& class_counts, double ratio,
                                   std::size_t total) {
    const std::size_t C = class_counts.size();
    std::vector<std::size_t> take(C, 0);
    std::vector<std::pair<double, std::size_t>> frac; // (-remainder, class)
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < C; ++c) {
        const double quota = static_cast<double>(class_counts[c]) * ratio;
        take[c] = stable_floor(quota);
        if (take[c] > class_counts[c]) take[c] = class_counts[c];
        assigned += take[c];
        frac.emplace_back(-(quota - static_cast<double>(take[c])), c);
    }
    std::sort(frac.begin(), frac.end());
    for (std::size_t i = 0; i < frac.size() && assigned < total; ++i) {
        const std::size_t c = frac[i].second;
        if (take[c] < class_counts[c]) {
            ++take[c];
            ++assigned;
        }
    }
    return take;
}

} // namespace

DatasetSplits make_splits(const std::vector<int>& labels, std::size_t n_classes,
                          const SplitRatios& ratios, std::uint64_t seed) {
    if (labels.empty()) throw ArgumentError("make_splits: empty label vector");
    if (n_classes == 0) throw ArgumentError("make_splits: n_classes must be positive");
    if (!(ratios.pretrain >= 0.0 && ratios.pretrain < 1.0) ||
        !(ratios.finetune >= 0.0 && ratios.finetune < 1.0)) {
        throw ArgumentError("make_splits: ratios must lie in [0, 1)");
    }
    if (ratios.finetune > ratios.pretrain) {
        throw ArgumentError("make_splits: finetune ratio exceeds pretrain ratio");
    }

    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
            throw ArgumentError("make_splits: label " + std::to_string(y) + " outside [0, " +
                                std::to_string(n_classes) + ")");
        }
        by_class[static_cast<std::size_t>(y)].push_back(r);
    }
    std::vector<std::size_t> counts(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) counts[c] = by_class[c].size();

    const std::size_t N = labels.size();
    const auto pre_take = apportion(counts, ratios.pretrain, stable_floor(N * ratios.pretrain));
    auto ft_take = apportion(counts, ratios.finetune, stable_floor(N * ratios.finetune));

    DatasetSplits splits;
    splits.seed = seed;
    RngStream rng(seed);
    for (std::size_t c = 0; c < n_classes; ++c) {
        rng.shuffle(by_class[c]);
        if (ft_take[c] > pre_take[c]) {
            ft_take[c] = pre_take[c]; // take-all fallback for short classes
            ++splits.short_classes;
        }
        for (std::size_t i = 0; i < pre_take[c]; ++i) splits.pretrain_idx.push_back(by_class[c][i]);
        for (std::size_t i = 0; i < ft_take[c]; ++i) splits.finetune_idx.push_back(by_class[c][i]);
    }
    std::sort(splits.pretrain_idx.begin(), splits.pretrain_idx.end());
    std::sort(splits.finetune_idx.begin(), splits.finetune_idx.end());

    std::vector<char> in_pre(N, 0);
    for (std::size_t r : splits.pretrain_idx) in_pre[r] = 1;
    for (std::size_t r = 0; r < N; ++r) {
        if (!in_pre[r]) splits.test_idx.push_back(r);
    }
    return splits;
}

LabeledData synth_generate(std::size_t classes, std::size_t dims, std::size_t per_class,
                           double separation, std::uint64_t seed) {
    if (classes < 2) throw ArgumentError("synth_generate: need at least 2 classes");
    if (dims < 2) throw ArgumentError("synth_generate: need at least 2 dims");
    if (per_class == 0) throw ArgumentError("synth_generate: per_class must be positive");

    const std::size_t n = classes * per_class;
    LabeledData data;
    data.features = Matrix(n, dims);
    data.labels.assign(n, 0);

    RngStream rng(seed);
    const double two_pi = 6.283185307179586476925286766559;
    std::size_t row = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double angle = two_pi * static_cast<double>(c) / static_cast<double>(classes);
        const double cx = separation * std::cos(angle);
        const double cy = separation * std::sin(angle);
        for (std::size_t k = 0; k < per_class; ++k, ++row) {
            double* dst = data.features.row_ptr(row);
            for (std::size_t d = 0; d < dims; ++d) dst[d] = rng.next_normal();
            dst[0] += cx;
            dst[1] += cy;
            data.labels[row] = static_cast<int>(c);
        }
    }

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    LabeledData shuffled;
    shuffled.features = Matrix(n, dims);
    shuffled.labels.assign(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        const double* src = data.features.row_ptr(perm[r]);
        std::copy(src, src + dims, shuffled.features.row_ptr(r));
        shuffled.labels[r] = data.labels[perm[r]];
    }
    return shuffled;
}

void write_labeled_csv(const std::string& path, const LabeledData& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (std::size_t d = 0; d < data.features.cols; ++d) out << "f" << d << ",";
    out << "label\n";
    char buf[40];
    for (std::size_t r = 0; r < data.features.rows; ++r) {
        const double* row = data.features.row_ptr(r);
        for (std::size_t d = 0; d < data.features.cols; ++d) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[d]);
            out << buf << ",";
        }
        out << data.labels[r] << "\n";
    }
    if (!out) throw IoError("write failure on " + path);
}

} // namespace ckan
