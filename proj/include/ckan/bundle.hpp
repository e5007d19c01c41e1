#pragma once

#include "ckan/contrastive.hpp"
#include "ckan/data.hpp"
#include "ckan/finetune.hpp"
#include "ckan/kan.hpp"

#include <cstdint>
#include <string>

namespace ckan {

inline constexpr int kBundleFormatVersion = 1;

// One self-describing file carrying everything inference needs: schema,
// scaler, extractor and (once fine-tuned) head, plus a config echo.
//
// Layout: `CKANBUNDLE <version> <json_len> <blob_len>\n`, then a JSON header
// (sorted keys) and a little-endian float64 blob holding every numeric array
// (scaler, then layer parameters in order). The header records an FNV-1a
// checksum of the blob; save -> load -> save is byte-identical.
struct ModelBundle {
    int format_version = kBundleFormatVersion;
    DatasetKind kind = DatasetKind::GenericCsv;
    std::string label_override; // generic_csv label column, "" = default
    ColumnSchema schema;        // class_names doubles as the model class list
    Scaler scaler;
    SplitRatios ratios;         // split protocol used at pretraining time
    KanNetwork extractor;
    bool has_head = false;
    KanLayer head;
    ContrastiveConfig pretrain_cfg;
    FinetuneConfig finetune_cfg; // meaningful when has_head

    ClassifierModel to_classifier() const; // throws StateError when !has_head
};

void save_bundle(const std::string& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::string& path);

std::uint64_t fnv1a(const unsigned char* data, std::size_t n);

} // namespace ckan
