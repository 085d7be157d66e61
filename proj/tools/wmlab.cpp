#include "wmlab/bench.hpp"
#include "wmlab/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace wmlab;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
};

bench::ExperimentConfig make_config(const GlobalOpts& g) {
    bench::ExperimentConfig cfg =
        g.config_path.empty() ? bench::default_config() : bench::load_config_file(g.config_path);
    if (g.seed_set) cfg.global_seed = g.seed;
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    return cfg;
}

bench::LabContext lab_from(const bench::ExperimentConfig& cfg, const std::string& lab_dir) {
    const std::string dir = lab_dir.empty() ? cfg.out_dir : lab_dir;
    if (fs::exists(fs::path(dir) / "checkpoints" / "decoder.ck")) {
        std::cerr << "loading lab from " << dir << "\n";
        return bench::load_lab(cfg, dir);
    }
    std::cerr << "building lab (pretrain + embed) under " << dir << "\n";
    bench::ExperimentConfig c = cfg;
    c.out_dir = dir;
    auto lab = bench::build_lab(c);
    bench::save_lab(lab, dir);
    std::cerr << "pretrain acc " << lab.pretrain_acc << ", embed val acc " << lab.embed_val_acc
              << ", psnr " << lab.embed_psnr << "\n";
    return lab;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoi(item));
    return out;
}

void print_csv_pretty(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("report: cannot open " + path);
    std::vector<std::vector<std::string>> cells;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::cout << line << "\n";
            continue;
        }
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) row.push_back(item);
        cells.push_back(std::move(row));
    }
    std::vector<size_t> widths;
    for (const auto& row : cells)
        for (size_t i = 0; i < row.size(); ++i) {
            if (widths.size() <= i) widths.resize(i + 1, 0);
            widths[i] = std::max(widths[i], row[i].size());
        }
    for (const auto& row : cells) {
        for (size_t i = 0; i < row.size(); ++i) {
            std::cout << row[i] << std::string(widths[i] - row[i].size() + 2, ' ');
        }
        std::cout << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"no-box watermark removal laboratory"};
    app.require_subcommand(1);
    GlobalOpts g;
    app.add_option("--config", g.config_path, "experiment config file (key=value sections)");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--seed", g.seed, "global seed")->each([&](const std::string&) {
        g.seed_set = true;
    });

    // pretrain
    auto* cmd_pretrain = app.add_subcommand("pretrain", "pre-train the watermark decoder");

    // embed
    auto* cmd_embed =
        app.add_subcommand("embed", "pre-train (if needed) and embed the watermark into the generator");

    // generate
    auto* cmd_generate = app.add_subcommand("generate", "render one image from a generator");
    std::string gen_model, gen_prompt = "a lighthouse over calm water", gen_out = "out.png";
    uint64_t gen_seed = 1;
    int gen_steps = 1;
    cmd_generate->add_option("--model", gen_model, "generator checkpoint (omit for clean base)");
    cmd_generate->add_option("--prompt", gen_prompt, "prompt text");
    cmd_generate->add_option("--gen-seed", gen_seed, "generation seed");
    cmd_generate->add_option("--steps", gen_steps, "smoothing steps");
    cmd_generate->add_option("--out-image", gen_out, "output PNG/PPM path");

    // attack
    auto* cmd_attack = app.add_subcommand("attack", "run one attack");
    cmd_attack->require_subcommand(1);
    auto* atk_edge = cmd_attack->add_subcommand("edge", "edge-prediction noise attack");
    std::string edge_in, edge_out = "edge_attacked.png";
    float edge_threshold = 0.25f, edge_noise = 1.0f;
    atk_edge->add_option("--image", edge_in, "input image")->required();
    atk_edge->add_option("--out-image", edge_out, "output image");
    atk_edge->add_option("--threshold", edge_threshold, "edge threshold in (0,1]");
    atk_edge->add_option("--noise-scale", edge_noise, "noise multiplier");

    auto* atk_blur = cmd_attack->add_subcommand("blur", "blur attack with optional deblur");
    std::string blur_in, blur_out_dir = ".", blur_method = "box";
    int blur_kernel = 9;
    double blur_snr = 1e3;
    bool blur_no_deblur = false;
    atk_blur->add_option("--image", blur_in, "input image")->required();
    atk_blur->add_option("--out-dir", blur_out_dir, "output directory");
    atk_blur->add_option("--method", blur_method, "box|gaussian|motion|resize8|resize16|resize32");
    atk_blur->add_option("--kernel-size", blur_kernel, "odd kernel size");
    atk_blur->add_option("--snr", blur_snr, "Wiener regularizer");
    atk_blur->add_flag("--no-deblur", blur_no_deblur, "skip the recovery pass");

    auto* atk_ft = cmd_attack->add_subcommand("finetune", "surrogate-decoder fine-tune attack");
    std::string ft_lab;
    atk_ft->add_option("--lab", ft_lab, "lab directory with defender checkpoints");

    // defend
    auto* cmd_defend = app.add_subcommand("defend", "smoothing-defended verification");
    std::string def_image, def_decoder, def_message, def_mode = "multilabel";
    int def_n = 100, def_w = 8;
    float def_beta = 0.3f;
    uint64_t def_seed = 0;
    cmd_defend->add_option("--image", def_image, "image to verify")->required();
    cmd_defend->add_option("--decoder", def_decoder, "decoder checkpoint")->required();
    cmd_defend->add_option("--message", def_message, "message file")->required();
    cmd_defend->add_option("--mode", def_mode, "multiclass|multilabel|regression");
    cmd_defend->add_option("--n", def_n, "number of perturbed copies");
    cmd_defend->add_option("--box-width", def_w, "noise box width");
    cmd_defend->add_option("--beta", def_beta, "noise amplitude");
    cmd_defend->add_option("--noise-seed", def_seed, "smoothing seed");

    // verify
    auto* cmd_verify = app.add_subcommand("verify", "plain double-sided verification");
    std::string ver_image, ver_decoder, ver_message;
    double ver_tau_low = 0.23, ver_tau_high = 0.77;
    cmd_verify->add_option("--image", ver_image, "image to verify")->required();
    cmd_verify->add_option("--decoder", ver_decoder, "decoder checkpoint")->required();
    cmd_verify->add_option("--message", ver_message, "message file")->required();
    cmd_verify->add_option("--tau-low", ver_tau_low, "lower verification threshold");
    cmd_verify->add_option("--tau-high", ver_tau_high, "upper verification threshold");

    // sweep
    auto* cmd_sweep = app.add_subcommand("sweep", "ablation sweeps, CSV output");
    cmd_sweep->require_subcommand(1);
    std::string sweep_lab;
    cmd_sweep->add_option("--lab", sweep_lab, "lab directory to reuse");
    auto* sw_kernel = cmd_sweep->add_subcommand("kernel", "box blur over kernel sizes");
    std::string kernel_sizes = "1,3,5,7,9,11,13,15";
    sw_kernel->add_option("--sizes", kernel_sizes, "comma-separated odd sizes");
    auto* sw_length = cmd_sweep->add_subcommand("length", "fine-tune attack message lengths");
    std::string length_list = "32,36,40,44,48,52,56,60,64";
    int length_trials = 10;
    sw_length->add_option("--lengths", length_list, "comma-separated lengths");
    sw_length->add_option("--trials", length_trials, "adversarial messages per length");
    auto* sw_depth = cmd_sweep->add_subcommand("depth", "surrogate decoder depths");
    std::string depth_list = "4,6,8,10,12";
    int depth_trials = 5;
    sw_depth->add_option("--depths", depth_list, "comma-separated depths");
    sw_depth->add_option("--trials", depth_trials, "adversarial messages per depth");
    auto* sw_blur = cmd_sweep->add_subcommand("blur-method", "blur method comparison table");
    int blur_table_kernel = 9;
    sw_blur->add_option("--kernel-size", blur_table_kernel, "box kernel size");

    // report
    auto* cmd_report = app.add_subcommand("report", "pretty-print a CSV report");
    std::string report_csv;
    cmd_report->add_option("--csv", report_csv, "report file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            app.exit(e);
            return 0;
        }
        app.exit(e);
        return 1;
    }

    try {
        if (cmd_pretrain->parsed()) {
            const auto cfg = make_config(g);
            fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");
            wm::EmbedTrainConfig tc;
            tc.decoder_lr = cfg.decoder_lr;
            tc.epochs = cfg.pretrain_epochs;
            tc.batch_size = cfg.batch_size;
            tc.target_bit_acc = cfg.target_bit_acc;
            auto pre = wm::pretrain_decoder(bench::pretrain_corpus(cfg), cfg.message_length,
                                            cfg.decoder_depth, tc,
                                            derive_seed(cfg.global_seed, "defender/pretrain"));
            pre.decoder.save((fs::path(cfg.out_dir) / "checkpoints" / "decoder.ck").string());
            pre.encoder.save((fs::path(cfg.out_dir) / "checkpoints" / "encoder.ck").string());
            nlohmann::json j{{"train_bit_acc", pre.train_bit_acc},
                             {"reached_target", pre.reached_target}};
            std::cout << j.dump() << "\n";
            if (!pre.reached_target) return 2;
        } else if (cmd_embed->parsed()) {
            const auto cfg = make_config(g);
            auto lab = bench::build_lab(cfg);
            bench::save_lab(lab, cfg.out_dir);
            nlohmann::json j{{"pretrain_acc", lab.pretrain_acc},
                             {"val_bit_acc", lab.embed_val_acc},
                             {"psnr_vs_base", lab.embed_psnr}};
            std::cout << j.dump() << "\n";
        } else if (cmd_generate->parsed()) {
            gen::GenerationRequest req{gen_prompt, gen_seed, gen_steps};
            if (gen_model.empty()) {
                img::save_image(gen::render_base(req), gen_out);
            } else {
                img::save_image(gen::generate(req, gen::GeneratorModel::load(gen_model)), gen_out);
            }
        } else if (atk_edge->parsed()) {
            attack::EdgeAttackConfig cfg;
            cfg.edge_threshold = edge_threshold;
            cfg.noise_scale = edge_noise;
            cfg.seed = g.seed;
            img::save_image(attack::edge_attack(img::load_image(edge_in), cfg), edge_out);
        } else if (atk_blur->parsed()) {
            attack::BlurAttackConfig cfg;
            cfg.method = attack::parse_blur_method(blur_method);
            cfg.kernel_size = blur_kernel;
            cfg.snr = blur_snr;
            cfg.deblur = !blur_no_deblur;
            const auto out = attack::blur_attack(img::load_image(blur_in), cfg);
            fs::create_directories(blur_out_dir);
            img::save_image(out.blurred, (fs::path(blur_out_dir) / "blurred.png").string());
            if (out.deblurred)
                img::save_image(*out.deblurred,
                                (fs::path(blur_out_dir) / "deblurred.png").string());
        } else if (atk_ft->parsed()) {
            const auto cfg = make_config(g);
            auto lab = lab_from(cfg, ft_lab);
            wm::EmbedTrainConfig scfg;
            scfg.decoder_lr = cfg.decoder_lr;
            scfg.epochs = cfg.pretrain_epochs;
            scfg.batch_size = cfg.batch_size;
            scfg.target_bit_acc = cfg.target_bit_acc;
            auto sur = attack::train_surrogate_decoder(
                bench::attacker_corpus(cfg), cfg.finetune.surrogate_depth,
                cfg.finetune.adversarial_length, scfg,
                derive_seed(cfg.global_seed, "surrogate/cli"));
            if (!sur.reached_target) {
                std::cerr << "surrogate training failed (acc " << sur.train_bit_acc << ")\n";
                return 2;
            }
            attack::FinetuneAttackConfig fcfg = cfg.finetune;
            fcfg.seed = derive_seed(cfg.global_seed, "finetune/cli");
            wm::Message m_hat = wm::random_message(fcfg.adversarial_length,
                                                   derive_seed(fcfg.seed, "mhat"));
            while (int(lab.m0.size()) == fcfg.adversarial_length && m_hat == lab.m0)
                m_hat = wm::random_message(fcfg.adversarial_length,
                                           derive_seed(fcfg.seed, "mhat-resample"));
            auto atk = attack::finetune_attack(lab.wm_model, sur.decoder, m_hat,
                                               bench::attacker_requests(cfg, cfg.finetune_requests),
                                               fcfg);
            fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");
            atk.model.save(
                (fs::path(cfg.out_dir) / "checkpoints" / "generator_attacked.ck").string());
            std::vector<img::Image> attacked;
            for (const auto& req : lab.eval_requests)
                attacked.push_back(gen::generate(req, atk.model));
            const auto summary = attack::evaluate_attack(attacked, lab.wm_eval_images,
                                                         *lab.decoder, lab.m0, cfg.policy);
            nlohmann::json j{{"attack", "finetune"},
                             {"mean_acc", summary.mean_acc},
                             {"success_rate", summary.success_rate},
                             {"mean_psnr", summary.mean_psnr},
                             {"surrogate_fit", atk.surrogate_bit_acc}};
            std::cout << j.dump() << "\n";
        } else if (cmd_defend->parsed()) {
            const auto image = img::load_image(def_image);
            const auto decoder = wm::WatermarkDecoder::load(def_decoder);
            const auto message = wm::load_message(def_message);
            defense::SmoothingConfig scfg;
            scfg.n_samples = def_n;
            scfg.box_width = def_w;
            scfg.noise_amplitude = def_beta;
            scfg.seed = def_seed;
            wm::VerificationPolicy policy;
            const auto res = defense::defended_verify(image, decoder, message, policy, scfg,
                                                      defense::parse_smoothing_mode(def_mode));
            nlohmann::json j{{"mode", defense::smoothing_mode_name(res.mode)},
                             {"acc", res.accuracy},
                             {"verdict", res.verdict.watermarked ? "watermarked" : "unwatermarked"}};
            std::cout << j.dump() << "\n";
        } else if (cmd_verify->parsed()) {
            const auto decoder = wm::WatermarkDecoder::load(ver_decoder);
            const auto message = wm::load_message(ver_message);
            wm::VerificationPolicy policy{ver_tau_low, ver_tau_high};
            const auto v = wm::verify(img::load_image(ver_image), decoder, message, policy);
            std::cout << wm::verdict_json(v) << "\n";
        } else if (cmd_sweep->parsed()) {
            const auto cfg = make_config(g);
            auto lab = lab_from(cfg, sweep_lab);
            fs::create_directories(fs::path(cfg.out_dir) / "reports");
            if (sw_kernel->parsed()) {
                std::vector<std::string> jsonl;
                const auto report =
                    bench::run_kernel_sweep(lab, parse_int_list(kernel_sizes), &jsonl);
                bench::write_report_csv(
                    report, (fs::path(cfg.out_dir) / "reports" / "kernel_sweep.csv").string());
                bench::write_jsonl(
                    jsonl, (fs::path(cfg.out_dir) / "reports" / "kernel_sweep.jsonl").string());
                std::cout << bench::report_to_csv(report);
            } else if (sw_length->parsed()) {
                const auto report =
                    bench::run_length_sweep(lab, parse_int_list(length_list), length_trials);
                bench::write_report_csv(
                    report, (fs::path(cfg.out_dir) / "reports" / "length_sweep.csv").string());
                std::cout << bench::report_to_csv(report);
            } else if (sw_depth->parsed()) {
                const auto report =
                    bench::run_depth_sweep(lab, parse_int_list(depth_list), depth_trials);
                bench::write_report_csv(
                    report, (fs::path(cfg.out_dir) / "reports" / "depth_sweep.csv").string());
                std::cout << bench::report_to_csv(report);
            } else if (sw_blur->parsed()) {
                std::vector<std::string> jsonl;
                const auto report = bench::run_blur_method_table(lab, blur_table_kernel, &jsonl);
                bench::write_report_csv(
                    report, (fs::path(cfg.out_dir) / "reports" / "blur_methods.csv").string());
                bench::write_jsonl(
                    jsonl, (fs::path(cfg.out_dir) / "reports" / "blur_methods.jsonl").string());
                std::cout << bench::report_to_csv(report);
            }
        } else if (cmd_report->parsed()) {
            print_csv_pretty(report_csv);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
