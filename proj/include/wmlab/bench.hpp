#pragma once

#include "wmlab/attacks.hpp"
#include "wmlab/defense.hpp"
#include "wmlab/genmodel.hpp"
#include "wmlab/watermark.hpp"

#include <optional>
#include <string>
#include <vector>

namespace wmlab::bench {

// ---- configuration -------------------------------------------------------------

// Parsed from a flat key=value file with [section] headers; arrays are
// comma-separated. Defaults give the desk-scale setup.
struct ExperimentConfig {
    // corpus
    std::vector<std::string> prompts;
    std::vector<uint64_t> seeds;
    std::vector<int> steps_list;
    int image_size = 64;

    // watermark
    int message_length = 48;
    int decoder_depth = 8;
    int pretrain_images = 200;
    int pretrain_epochs = 12;
    int embed_epochs = 40;
    double decoder_lr = 0.02;
    double generator_lr = 0.0005;
    double image_weight = 1.0;
    double target_bit_acc = 0.95;
    int batch_size = 8;

    // attacks
    std::vector<std::string> attacks; // subset of {edge, blur, finetune}
    attack::EdgeAttackConfig edge;
    attack::BlurAttackConfig blur;
    attack::FinetuneAttackConfig finetune;
    int finetune_requests = 48;
    int attack_trials = 10; // adversarial messages per sweep condition

    // defense
    bool defense_enabled = false;
    defense::SmoothingConfig smoothing;

    // policy
    wm::VerificationPolicy policy;

    // run
    uint64_t global_seed = 7;
    std::string out_dir = "out";
    int eval_count = 20;
};

ExperimentConfig default_config();
ExperimentConfig load_config_file(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& section,
                       const std::string& key, const std::string& value);

// ---- reports ---------------------------------------------------------------------

// A rectangular table with a fixed header; every cell is preformatted text.
// Numbers go through format_g6 (6 significant digits) so reruns are
// byte-identical.
struct Report {
    std::vector<std::string> comments; // emitted as '# ' lines before the header
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> cells);
};

std::string format_g6(double v);
std::string report_to_csv(const Report& report);
void write_report_csv(const Report& report, const std::string& path);

// One JSON object per line.
void write_jsonl(const std::vector<std::string>& lines, const std::string& path);

double spearman_rank_correlation(const std::vector<double>& x, const std::vector<double>& y);

// ---- shared experiment state -------------------------------------------------------

// Everything the defender builds once and every attack condition reuses.
struct LabContext {
    ExperimentConfig cfg;
    std::optional<wm::WatermarkEncoder> encoder;
    std::optional<wm::WatermarkDecoder> decoder;
    gen::GeneratorModel clean_model;
    gen::GeneratorModel wm_model;
    wm::Message m0;
    std::vector<gen::GenerationRequest> embed_requests;
    std::vector<gen::GenerationRequest> eval_requests;
    std::vector<img::Image> base_eval_images; // render_base per eval request
    std::vector<img::Image> wm_eval_images;   // watermarked generator output
    double pretrain_acc = 0.0;
    double embed_val_acc = 0.0;
    double embed_psnr = 0.0;
};

// Deterministic corpora derived from the global seed.
std::vector<img::Image> pretrain_corpus(const ExperimentConfig& cfg);
std::vector<img::Image> attacker_corpus(const ExperimentConfig& cfg);
std::vector<gen::GenerationRequest> attacker_requests(const ExperimentConfig& cfg, int count);

// Pretrains the decoder and embeds the watermark. Training shortfalls are
// carried in the context, not thrown.
LabContext build_lab(const ExperimentConfig& cfg);

void save_lab(const LabContext& lab, const std::string& dir);
LabContext load_lab(const ExperimentConfig& cfg, const std::string& dir);

// ---- pipelines -----------------------------------------------------------------------

struct PipelineResult {
    Report attack_report;
    std::optional<Report> defense_report;
    std::vector<std::string> per_image_jsonl;
};

// pretrain -> embed -> attack(s) -> (optional defense) -> evaluate; persists
// checkpoints, images and reports under cfg.out_dir.
PipelineResult run_pipeline(const ExperimentConfig& cfg);

Report run_kernel_sweep(LabContext& lab, const std::vector<int>& sizes,
                        std::vector<std::string>* jsonl = nullptr);
Report run_blur_method_table(LabContext& lab, int kernel_size,
                             std::vector<std::string>* jsonl = nullptr);
Report run_length_sweep(LabContext& lab, const std::vector<int>& lengths, int trials);
Report run_depth_sweep(LabContext& lab, const std::vector<int>& depths, int trials);

// Mean accuracies of the three smoothing modes over a set of images.
struct DefenseSummary {
    double plain = 0.0;
    double multiclass = 0.0;
    double multilabel = 0.0;
    double regression = 0.0;
};
DefenseSummary defended_accuracy(const std::vector<img::Image>& images, LabContext& lab,
                                 uint64_t seed);

} // namespace wmlab::bench
