#include "wmlab/bench.hpp"

#include "wmlab/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <stdexcept>

namespace wmlab::bench {

namespace fs = std::filesystem;

namespace {

constexpr const char* kQualityNote =
    "quality columns: psnr/ssim proxies stand in for FID/IS; CLIP similarity omitted";

void append_eval_jsonl(std::vector<std::string>* jsonl, const std::string& table,
                       const std::string& condition, const attack::EvalSummary& s) {
    if (!jsonl) return;
    for (size_t i = 0; i < s.rows.size(); ++i) {
        nlohmann::json j{{"table", table},
                         {"condition", condition},
                         {"index", i},
                         {"acc", s.rows[i].acc},
                         {"verdict", s.rows[i].watermarked ? "watermarked" : "unwatermarked"},
                         {"psnr", std::min(s.rows[i].psnr, 99.0)},
                         {"ssim", s.rows[i].ssim}};
        jsonl->push_back(j.dump());
    }
}

// Attack stages may not touch the target decoder; evaluation may.
struct NoBoxAudit {
    const wm::WatermarkDecoder& decoder;
    uint64_t before;

    explicit NoBoxAudit(const wm::WatermarkDecoder& d) : decoder(d), before(d.forward_count()) {}
    void expect_untouched(const char* stage) const {
        if (decoder.forward_count() != before)
            throw std::logic_error(std::string("no-box audit: target decoder was queried during ") +
                                   stage);
    }
};

struct FinetuneTrial {
    attack::EvalSummary eval;
    DefenseSummary defense;
    bool defended = false;
};

FinetuneTrial run_finetune_trial(LabContext& lab, const attack::SurrogateDecoder& surrogate,
                                 const attack::FinetuneAttackConfig& fcfg,
                                 const std::string& trial_name, bool with_defense) {
    const auto& cfg = lab.cfg;
    wm::Message m_hat = wm::random_message(fcfg.adversarial_length,
                                           derive_seed(fcfg.seed, "mhat/" + trial_name));
    // Eq-style constraint: the adversarial message must differ from m0
    while (int(lab.m0.size()) == fcfg.adversarial_length && m_hat == lab.m0)
        m_hat = wm::random_message(fcfg.adversarial_length,
                                   derive_seed(fcfg.seed, "mhat-resample/" + trial_name));

    const auto requests = attacker_requests(cfg, cfg.finetune_requests);

    NoBoxAudit audit(*lab.decoder);
    auto result = attack::finetune_attack(lab.wm_model, surrogate, m_hat, requests, fcfg);
    audit.expect_untouched("finetune attack");

    std::vector<img::Image> attacked_images;
    attacked_images.reserve(lab.eval_requests.size());
    for (const auto& req : lab.eval_requests)
        attacked_images.push_back(gen::generate(req, result.model));

    FinetuneTrial trial;
    trial.eval = attack::evaluate_attack(attacked_images, lab.wm_eval_images, *lab.decoder,
                                         lab.m0, cfg.policy);
    if (with_defense) {
        trial.defense = defended_accuracy(attacked_images, lab,
                                          derive_seed(fcfg.seed, "defense/" + trial_name));
        trial.defended = true;
    }
    return trial;
}

std::vector<std::string> eval_cells(const attack::EvalSummary& s) {
    return {format_g6(s.mean_acc), format_g6(s.std_acc),   format_g6(s.success_rate),
            format_g6(s.mean_psnr), format_g6(s.mean_ssim)};
}

} // namespace

DefenseSummary defended_accuracy(const std::vector<img::Image>& images, LabContext& lab,
                                 uint64_t seed) {
    DefenseSummary sum;
    defense::SmoothingConfig scfg = lab.cfg.smoothing;
    for (size_t i = 0; i < images.size(); ++i) {
        scfg.seed = derive_seed(seed, "image/" + std::to_string(i));
        sum.plain += wm::verify(images[i], *lab.decoder, lab.m0, lab.cfg.policy).acc;
        sum.multiclass += defense::defended_verify(images[i], *lab.decoder, lab.m0,
                                                   lab.cfg.policy, scfg,
                                                   defense::SmoothingMode::multiclass)
                              .accuracy;
        sum.multilabel += defense::defended_verify(images[i], *lab.decoder, lab.m0,
                                                   lab.cfg.policy, scfg,
                                                   defense::SmoothingMode::multilabel)
                              .accuracy;
        sum.regression += defense::defended_verify(images[i], *lab.decoder, lab.m0,
                                                   lab.cfg.policy, scfg,
                                                   defense::SmoothingMode::regression)
                              .accuracy;
    }
    const double n = double(images.size());
    sum.plain /= n;
    sum.multiclass /= n;
    sum.multilabel /= n;
    sum.regression /= n;
    return sum;
}

Report run_kernel_sweep(LabContext& lab, const std::vector<int>& sizes,
                        std::vector<std::string>* jsonl) {
    Report report;
    report.comments = {kQualityNote, "box blur sweep over the watermarked evaluation set"};
    report.columns = {"kernel_size", "variant",   "mean_acc",  "std_acc",
                      "success_rate", "mean_psnr", "mean_ssim"};
    for (int n : sizes) {
        attack::BlurAttackConfig bcfg = lab.cfg.blur;
        bcfg.method = attack::BlurMethod::box;
        bcfg.kernel_size = n;
        bcfg.deblur = true;

        NoBoxAudit audit(*lab.decoder);
        std::vector<img::Image> blurred, deblurred;
        for (const auto& im : lab.wm_eval_images) {
            auto out = attack::blur_attack(im, bcfg);
            blurred.push_back(std::move(out.blurred));
            deblurred.push_back(std::move(*out.deblurred));
        }
        audit.expect_untouched("box blur attack");

        const auto eb = attack::evaluate_attack(blurred, lab.wm_eval_images, *lab.decoder,
                                                lab.m0, lab.cfg.policy);
        const auto ed = attack::evaluate_attack(deblurred, lab.wm_eval_images, *lab.decoder,
                                                lab.m0, lab.cfg.policy);
        append_eval_jsonl(jsonl, "kernel_sweep", "k" + std::to_string(n) + "/blurred", eb);
        append_eval_jsonl(jsonl, "kernel_sweep", "k" + std::to_string(n) + "/deblurred", ed);

        auto brow = eval_cells(eb);
        brow.insert(brow.begin(), {std::to_string(n), "blurred"});
        report.add_row(std::move(brow));
        auto drow = eval_cells(ed);
        drow.insert(drow.begin(), {std::to_string(n), "deblurred"});
        report.add_row(std::move(drow));
    }
    return report;
}

Report run_blur_method_table(LabContext& lab, int kernel_size,
                             std::vector<std::string>* jsonl) {
    Report report;
    report.comments = {kQualityNote, "blur method comparison at box kernel size " +
                                          std::to_string(kernel_size)};
    report.columns = {"image_type",  "method",    "mean_acc", "std_acc",
                      "success_rate", "mean_psnr", "mean_ssim"};
    const std::vector<attack::BlurMethod> methods = {
        attack::BlurMethod::resize8, attack::BlurMethod::resize16, attack::BlurMethod::resize32,
        attack::BlurMethod::motion,  attack::BlurMethod::gaussian, attack::BlurMethod::box};

    std::vector<std::pair<std::string, attack::EvalSummary>> blurred_rows, deblurred_rows;
    for (auto method : methods) {
        attack::BlurAttackConfig bcfg = lab.cfg.blur;
        bcfg.method = method;
        bcfg.kernel_size = kernel_size;
        bcfg.deblur = true;

        NoBoxAudit audit(*lab.decoder);
        std::vector<img::Image> blurred, deblurred;
        for (const auto& im : lab.wm_eval_images) {
            auto out = attack::blur_attack(im, bcfg);
            blurred.push_back(std::move(out.blurred));
            deblurred.push_back(std::move(*out.deblurred));
        }
        audit.expect_untouched("blur attack");

        const std::string name = attack::blur_method_name(method);
        blurred_rows.emplace_back(name, attack::evaluate_attack(blurred, lab.wm_eval_images,
                                                                *lab.decoder, lab.m0,
                                                                lab.cfg.policy));
        deblurred_rows.emplace_back(name, attack::evaluate_attack(deblurred, lab.wm_eval_images,
                                                                  *lab.decoder, lab.m0,
                                                                  lab.cfg.policy));
        append_eval_jsonl(jsonl, "blur_method", name + "/blurred", blurred_rows.back().second);
        append_eval_jsonl(jsonl, "blur_method", name + "/deblurred", deblurred_rows.back().second);
    }
    for (const auto& [name, summary] : blurred_rows) {
        auto row = eval_cells(summary);
        row.insert(row.begin(), {"blurred", name});
        report.add_row(std::move(row));
    }
    for (const auto& [name, summary] : deblurred_rows) {
        auto row = eval_cells(summary);
        row.insert(row.begin(), {"deblurred", name});
        report.add_row(std::move(row));
    }
    return report;
}

Report run_length_sweep(LabContext& lab, const std::vector<int>& lengths, int trials) {
    const auto& cfg = lab.cfg;
    Report report;
    report.comments = {kQualityNote,
                       "fine-tune attack vs adversarial message length; ground truth length " +
                           std::to_string(cfg.message_length),
                       "defense columns use " + std::to_string(cfg.smoothing.n_samples) +
                           " box-noise samples per image"};
    report.columns = {"bits",      "mean_acc", "success_rate", "mean_psnr",
                      "mean_ssim", "class",    "label",        "regression", "status"};

    wm::EmbedTrainConfig scfg;
    scfg.decoder_lr = cfg.decoder_lr;
    scfg.epochs = cfg.pretrain_epochs;
    scfg.batch_size = cfg.batch_size;
    scfg.target_bit_acc = cfg.target_bit_acc;

    const auto corpus = attacker_corpus(cfg);
    for (int length : lengths) {
        const std::string cond = "len" + std::to_string(length);
        auto sur = attack::train_surrogate_decoder(
            corpus, cfg.finetune.surrogate_depth, length, scfg,
            derive_seed(cfg.global_seed, "surrogate/" + cond));
        if (!sur.reached_target) {
            report.add_row({std::to_string(length), "0", "0", "0", "0", "0", "0", "0",
                            "train_failure"});
            continue;
        }
        double acc = 0, success = 0, psnr = 0, ssim = 0, dc = 0, dl = 0, dr = 0;
        for (int t = 0; t < trials; ++t) {
            attack::FinetuneAttackConfig fcfg = cfg.finetune;
            fcfg.adversarial_length = length;
            fcfg.seed = derive_seed(cfg.global_seed, "finetune/" + cond + "/t" + std::to_string(t));
            const auto trial = run_finetune_trial(lab, sur.decoder, fcfg,
                                                  cond + "/t" + std::to_string(t), true);
            acc += trial.eval.mean_acc;
            success += trial.eval.success_rate;
            psnr += trial.eval.mean_psnr;
            ssim += trial.eval.mean_ssim;
            dc += trial.defense.multiclass;
            dl += trial.defense.multilabel;
            dr += trial.defense.regression;
        }
        const double n = double(trials);
        report.add_row({std::to_string(length), format_g6(acc / n), format_g6(success / n),
                        format_g6(psnr / n), format_g6(ssim / n), format_g6(dc / n),
                        format_g6(dl / n), format_g6(dr / n), "ok"});
    }
    return report;
}

Report run_depth_sweep(LabContext& lab, const std::vector<int>& depths, int trials) {
    const auto& cfg = lab.cfg;
    Report report;
    report.comments = {kQualityNote, "fine-tune attack vs surrogate depth; target decoder depth " +
                                         std::to_string(cfg.decoder_depth)};
    report.columns = {"depth", "mean_acc", "success_rate", "mean_psnr", "mean_ssim", "status"};

    wm::EmbedTrainConfig scfg;
    scfg.decoder_lr = cfg.decoder_lr;
    scfg.epochs = cfg.pretrain_epochs;
    scfg.batch_size = cfg.batch_size;
    scfg.target_bit_acc = cfg.target_bit_acc;

    const auto corpus = attacker_corpus(cfg);
    for (int depth : depths) {
        const std::string cond = "depth" + std::to_string(depth);
        auto sur = attack::train_surrogate_decoder(corpus, depth, cfg.message_length, scfg,
                                                   derive_seed(cfg.global_seed,
                                                               "surrogate/" + cond));
        if (!sur.reached_target) {
            report.add_row({std::to_string(depth), "0", "0", "0", "0", "train_failure"});
            continue;
        }
        double acc = 0, success = 0, psnr = 0, ssim = 0;
        for (int t = 0; t < trials; ++t) {
            attack::FinetuneAttackConfig fcfg = cfg.finetune;
            fcfg.adversarial_length = cfg.message_length;
            fcfg.surrogate_depth = depth;
            fcfg.seed = derive_seed(cfg.global_seed, "finetune/" + cond + "/t" + std::to_string(t));
            const auto trial = run_finetune_trial(lab, sur.decoder, fcfg,
                                                  cond + "/t" + std::to_string(t), false);
            acc += trial.eval.mean_acc;
            success += trial.eval.success_rate;
            psnr += trial.eval.mean_psnr;
            ssim += trial.eval.mean_ssim;
        }
        const double n = double(trials);
        report.add_row({std::to_string(depth), format_g6(acc / n), format_g6(success / n),
                        format_g6(psnr / n), format_g6(ssim / n), "ok"});
    }
    return report;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    PipelineResult result;
    LabContext lab = build_lab(cfg);
    save_lab(lab, cfg.out_dir);

    result.attack_report.comments = {kQualityNote};
    result.attack_report.columns = {"attack",      "variant",   "mean_acc",  "std_acc",
                                    "success_rate", "mean_psnr", "mean_ssim", "status"};
    Report defense_report;
    defense_report.columns = {"attack", "variant", "plain_acc", "class", "label", "regression"};

    auto add_eval = [&](const std::string& attack_name, const std::string& variant,
                        const std::vector<img::Image>& images) {
        const auto summary = attack::evaluate_attack(images, lab.wm_eval_images, *lab.decoder,
                                                     lab.m0, cfg.policy);
        append_eval_jsonl(&result.per_image_jsonl, "pipeline", attack_name + "/" + variant,
                          summary);
        auto row = eval_cells(summary);
        row.insert(row.begin(), {attack_name, variant});
        row.push_back("ok");
        result.attack_report.add_row(std::move(row));
        if (cfg.defense_enabled) {
            const auto d = defended_accuracy(
                images, lab, derive_seed(cfg.global_seed, "defense/" + attack_name + variant));
            defense_report.add_row({attack_name, variant, format_g6(d.plain),
                                    format_g6(d.multiclass), format_g6(d.multilabel),
                                    format_g6(d.regression)});
        }
    };

    for (const auto& name : cfg.attacks) {
        if (name == "identity") {
            add_eval("identity", "plain", lab.wm_eval_images);
        } else if (name == "edge") {
            NoBoxAudit audit(*lab.decoder);
            std::vector<img::Image> attacked;
            for (size_t i = 0; i < lab.wm_eval_images.size(); ++i) {
                attack::EdgeAttackConfig ecfg = cfg.edge;
                ecfg.seed = derive_seed(cfg.global_seed, "edge/" + std::to_string(i));
                attacked.push_back(attack::edge_attack(lab.wm_eval_images[i], ecfg));
            }
            audit.expect_untouched("edge attack");
            add_eval("edge", "noisy", attacked);
        } else if (name == "blur") {
            NoBoxAudit audit(*lab.decoder);
            std::vector<img::Image> blurred, deblurred;
            for (const auto& im : lab.wm_eval_images) {
                auto out = attack::blur_attack(im, cfg.blur);
                blurred.push_back(std::move(out.blurred));
                if (out.deblurred) deblurred.push_back(std::move(*out.deblurred));
            }
            audit.expect_untouched("blur attack");
            add_eval("blur_" + attack::blur_method_name(cfg.blur.method), "blurred", blurred);
            if (!deblurred.empty())
                add_eval("blur_" + attack::blur_method_name(cfg.blur.method), "deblurred",
                         deblurred);
        } else if (name == "finetune") {
            wm::EmbedTrainConfig scfg;
            scfg.decoder_lr = cfg.decoder_lr;
            scfg.epochs = cfg.pretrain_epochs;
            scfg.batch_size = cfg.batch_size;
            scfg.target_bit_acc = cfg.target_bit_acc;
            auto sur = attack::train_surrogate_decoder(
                attacker_corpus(cfg), cfg.finetune.surrogate_depth,
                cfg.finetune.adversarial_length, scfg,
                derive_seed(cfg.global_seed, "surrogate/pipeline"));
            if (!sur.reached_target) {
                result.attack_report.add_row(
                    {"finetune", "attacked", "0", "0", "0", "0", "0", "train_failure"});
                continue;
            }
            attack::FinetuneAttackConfig fcfg = cfg.finetune;
            fcfg.seed = derive_seed(cfg.global_seed, "finetune/pipeline");
            NoBoxAudit audit(*lab.decoder);
            wm::Message m_hat =
                wm::random_message(fcfg.adversarial_length, derive_seed(fcfg.seed, "mhat"));
            while (int(lab.m0.size()) == fcfg.adversarial_length && m_hat == lab.m0)
                m_hat = wm::random_message(fcfg.adversarial_length,
                                           derive_seed(fcfg.seed, "mhat-resample"));
            auto atk = attack::finetune_attack(lab.wm_model, sur.decoder, m_hat,
                                               attacker_requests(cfg, cfg.finetune_requests),
                                               fcfg);
            audit.expect_untouched("finetune attack");
            atk.model.save(
                (fs::path(cfg.out_dir) / "checkpoints" / "generator_attacked.ck").string());
            std::vector<img::Image> attacked;
            for (const auto& req : lab.eval_requests)
                attacked.push_back(gen::generate(req, atk.model));
            add_eval("finetune", "attacked", attacked);
        } else {
            throw std::invalid_argument("pipeline: unknown attack '" + name + "'");
        }
    }

    write_report_csv(result.attack_report,
                     (fs::path(cfg.out_dir) / "reports" / "attacks.csv").string());
    write_jsonl(result.per_image_jsonl,
                (fs::path(cfg.out_dir) / "reports" / "per_image.jsonl").string());
    if (cfg.defense_enabled) {
        write_report_csv(defense_report,
                         (fs::path(cfg.out_dir) / "reports" / "defense.csv").string());
        result.defense_report = std::move(defense_report);
    }
    return result;
}

} // namespace wmlab::bench
