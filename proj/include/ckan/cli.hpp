#pragma once

#include "ckan/bundle.hpp"
#include "ckan/contrastive.hpp"
#include "ckan/data.hpp"
#include "ckan/finetune.hpp"
#include "ckan/metrics.hpp"
#include "ckan/optim.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ckan {

// Everything a run needs, resolved from (in order of increasing precedence)
// the dataset preset, the config file, --set key=value overrides, and
// dedicated flags. The seed is the master seed; per-stage streams are derived
// from it (split: +1, extractor init: +2, pretrain loop: +3, head init: +4,
// finetune loop: +5).
struct RunConfig {
    DatasetKind dataset = DatasetKind::GenericCsv;
    std::string label_column; // generic_csv label column ("" = "label")
    std::vector<std::size_t> extractor_widths = {16};
    int grid_size = 5;
    int spline_order = 3;
    double range_min = -1.0;
    double range_max = 1.0;
    double pretrain_ratio = -1.0; // < 0 = dataset default
    double finetune_ratio = -1.0;
    std::string scaling = "standard"; // standard | minmax

    std::size_t pretrain_batch_size = 64;
    double masking_fraction = 0.2;
    double temperature = 0.5;
    std::size_t pretrain_epochs = 50;
    double pretrain_learning_rate = 1e-3;
    OptimizerKind pretrain_optimizer = OptimizerKind::Adam;

    std::size_t finetune_batch_size = 64;
    std::size_t finetune_epochs = 100;
    double finetune_learning_rate = 1e-3;
    OptimizerKind finetune_optimizer = OptimizerKind::AdamW;
    double weight_decay = 0.01;

    Averaging averaging = Averaging::Macro;
    std::uint64_t seed = 42;

    SplitRatios effective_ratios() const;
};

// The paper's per-dataset hyperparameters (architecture, G, K, batch sizes,
// masking fraction); generic_csv gets desk-scale defaults.
RunConfig preset_for(DatasetKind kind);

// Flat `key = value` document, '#' comments. Throws IoError/ArgumentError.
std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path);

// Applies entries onto a config; unknown keys and unparseable values throw
// ArgumentError naming the key.
void apply_kv(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& entries);

OptimizerKind optimizer_kind_from_string(const std::string& name);

struct PretrainArgs {
    std::string data_path;
    std::string out_path;
    std::string config_path; // optional
    std::string dataset;     // optional, overrides the config file
    std::string label;       // optional generic_csv label column
    std::vector<std::string> overrides; // key=value
    std::string use_split = "pretrain"; // pretrain | all
    long long seed = -1; // < 0 = config/preset seed
};
int cmd_pretrain(const PretrainArgs& args);

struct FinetuneArgs {
    std::string bundle_path;
    std::string data_path;
    std::string out_path;
    std::string config_path;
    std::vector<std::string> overrides;
    std::string use_split = "finetune"; // finetune | pretrain | test | all
    long long seed = -1; // < 0 = the bundle's master seed
    bool end_to_end = false; // ablation: extractor unfrozen
};
int cmd_finetune(const FinetuneArgs& args);

struct EvaluateArgs {
    std::string bundle_path;
    std::string data_path;
    std::string report_path;
    std::string use_split = "test";
    std::string averaging = "macro";
};
int cmd_evaluate(const EvaluateArgs& args);

struct BenchArgs {
    std::string bundle_path;
    std::string data_path;
    std::string use_split = "test";
    std::size_t repeats = 5;
    std::size_t batch_size = 0; // 0 = the bundle's fine-tuning batch size
};
int cmd_bench(const BenchArgs& args);

struct ExportSplinesArgs {
    std::string bundle_path;
    std::string out_path;
    std::string layer = "0"; // extractor layer index, or "head"
    std::string edges;       // "in:out,in:out,..."; "" = first 12 edges
    std::size_t samples = 201;
};
int cmd_export_splines(const ExportSplinesArgs& args);

struct SynthArgs {
    std::size_t classes = 3;
    std::size_t dims = 2;
    std::size_t per_class = 1000;
    double separation = 6.0;
    std::uint64_t seed = 42;
    std::string out_path;
};
int cmd_synth(const SynthArgs& args);

// Full argv entry point; maps usage/input errors to exit 2 and internal
// failures to exit 1.
int run_cli(int argc, const char* const* argv);

} // namespace ckan
