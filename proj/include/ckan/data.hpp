#pragma once

#include "ckan/csv.hpp"
#include "ckan/matrix.hpp"
#include "ckan/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ckan {

enum class DatasetKind { UnswNb15, BotIot, GasPipeline, GenericCsv };

DatasetKind dataset_kind_from_string(const std::string& name); // throws ArgumentError
std::string dataset_kind_to_string(DatasetKind kind);

enum class ColumnKind { Numeric, Categorical, Drop, Label };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<std::string> vocabulary; // categorical only, sorted ascending
};

// Schema over the raw CSV columns plus the fitted label vocabulary. Fixed at
// fit time and serialized with the model bundle.
struct ColumnSchema {
    std::vector<ColumnSpec> columns;      // one per raw column, file order
    std::vector<std::string> class_names; // label value -> class index

    std::size_t feature_width() const;
    std::size_t n_classes() const { return class_names.size(); }
    int label_column() const; // index into columns, -1 when absent
    int class_index(const std::string& name) const; // -1 when unknown
};

// Loaded rows after per-dataset drops/filters; cells still raw strings.
struct RawTable {
    DatasetKind kind = DatasetKind::GenericCsv;
    std::string label_name;
    std::vector<std::string> feature_names;
    std::vector<ColumnKind> feature_kinds; // Numeric or Categorical, per feature column
    std::vector<std::vector<std::string>> feature_cells; // column-major
    std::vector<std::string> labels;

    std::size_t n_rows() const { return labels.size(); }
    std::size_t n_feature_columns() const { return feature_names.size(); }
};

// Applies the per-dataset rules: column drops, label designation, class
// filtering (UNSW), and column-kind assignment. `label_override` names the
// label column for generic_csv (defaults to "label").
RawTable load_dataset(const std::string& path, DatasetKind kind,
                      const std::string& label_override = "");
RawTable table_from_csv(const CsvTable& csv, DatasetKind kind,
                        const std::string& label_override = "");

// Drops rows with missing/unparseable feature cells or empty labels in place;
// returns the dropped-row count.
std::size_t handle_missing(RawTable& table);

// Fits categorical vocabularies and the label vocabulary (both sorted
// lexicographically) over the whole cleaned table.
ColumnSchema fit_schema(const RawTable& table);

struct EncodedData {
    Matrix features;
    std::vector<int> labels; // parallel to rows
    std::size_t unseen_category_cells = 0; // encoded as all-zero blocks
    std::size_t unknown_label_rows = 0;    // rows excluded from the output
};

// One-hot + numeric encoding under a fitted schema. Rows whose label is not
// in the schema vocabulary are excluded and counted.
EncodedData encode(const RawTable& table, const ColumnSchema& schema);

inline constexpr double kSigmaFloor = 1e-8;

struct Scaler {
    std::vector<double> mu;
    std::vector<double> sigma; // population sd, entries < kSigmaFloor replaced by 1
};

Scaler fit_scaler(const Matrix& pretrain_features); // ArgumentError on empty input

// Optional alternative (off by default): mu = column min, sigma = column
// range, so transform() maps onto [0, 1]. Constant columns floor to 1.
Scaler fit_min_max(const Matrix& pretrain_features);

Matrix transform(const Scaler& scaler, const Matrix& features);

struct SplitRatios {
    double pretrain = 0.0;
    double finetune = 0.0;
};

SplitRatios split_ratios_for(DatasetKind kind);

struct DatasetSplits {
    std::vector<std::size_t> pretrain_idx; // ascending row indices
    std::vector<std::size_t> finetune_idx; // subset of pretrain_idx
    std::vector<std::size_t> test_idx;     // complement of pretrain_idx
    std::uint64_t seed = 0;
    std::size_t short_classes = 0; // classes whose quota exceeded their size
};

// Stratified uniform sampling without replacement. Split totals are
// floor(N*ratio), apportioned per class by largest remainder (ties broken
// toward the lower class index).
DatasetSplits make_splits(const std::vector<int>& labels, std::size_t n_classes,
                          const SplitRatios& ratios, std::uint64_t seed);

struct LabeledData {
    Matrix features;
    std::vector<int> labels;
};

// Gaussian blobs: class c centered at separation * (cos(2*pi*c/C),
// sin(2*pi*c/C), 0, ...), unit covariance, rows shuffled.
LabeledData synth_generate(std::size_t classes, std::size_t dims, std::size_t per_class,
                           double separation, std::uint64_t seed);

void write_labeled_csv(const std::string& path, const LabeledData& data);

} // namespace ckan
