#include "wmlab/bench.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wmlab::bench {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> int_list(const std::string& v) {
    std::vector<int> out;
    for (const auto& s : split_list(v)) out.push_back(std::stoi(s));
    return out;
}

std::vector<uint64_t> u64_list(const std::string& v) {
    std::vector<uint64_t> out;
    for (const auto& s : split_list(v)) out.push_back(std::stoull(s));
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean '" + v + "'");
}

} // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.prompts = {"a lighthouse over calm water", "red dunes at noon",
                   "wild corridor of birches", "machines resting in a field",
                   "harbor lights before the storm"};
    cfg.seeds = {1, 2, 3, 4, 5};
    cfg.steps_list = {1, 2};
    cfg.attacks = {"blur"};
    return cfg;
}

void apply_config_line(ExperimentConfig& cfg, const std::string& section,
                       const std::string& key, const std::string& value) {
    const std::string k = section.empty() ? key : section + "." + key;
    if (k == "corpus.prompts") cfg.prompts = split_list(value);
    else if (k == "corpus.seeds") cfg.seeds = u64_list(value);
    else if (k == "corpus.steps") cfg.steps_list = int_list(value);
    else if (k == "corpus.image_size") cfg.image_size = std::stoi(value);
    else if (k == "watermark.message_length") cfg.message_length = std::stoi(value);
    else if (k == "watermark.decoder_depth") cfg.decoder_depth = std::stoi(value);
    else if (k == "watermark.pretrain_images") cfg.pretrain_images = std::stoi(value);
    else if (k == "watermark.pretrain_epochs") cfg.pretrain_epochs = std::stoi(value);
    else if (k == "watermark.embed_epochs") cfg.embed_epochs = std::stoi(value);
    else if (k == "watermark.decoder_lr") cfg.decoder_lr = std::stod(value);
    else if (k == "watermark.generator_lr") cfg.generator_lr = std::stod(value);
    else if (k == "watermark.image_weight") cfg.image_weight = std::stod(value);
    else if (k == "watermark.target_bit_acc") cfg.target_bit_acc = std::stod(value);
    else if (k == "watermark.batch_size") cfg.batch_size = std::stoi(value);
    else if (k == "attack.attacks") cfg.attacks = split_list(value);
    else if (k == "attack.trials") cfg.attack_trials = std::stoi(value);
    else if (k == "attack.finetune_requests") cfg.finetune_requests = std::stoi(value);
    else if (k == "edge.threshold") cfg.edge.edge_threshold = std::stof(value);
    else if (k == "edge.noise_scale") cfg.edge.noise_scale = std::stof(value);
    else if (k == "blur.method") cfg.blur.method = attack::parse_blur_method(value);
    else if (k == "blur.kernel_size") cfg.blur.kernel_size = std::stoi(value);
    else if (k == "blur.snr") cfg.blur.snr = std::stod(value);
    else if (k == "blur.deblur") cfg.blur.deblur = parse_bool(value);
    else if (k == "finetune.adversarial_length") cfg.finetune.adversarial_length = std::stoi(value);
    else if (k == "finetune.surrogate_depth") cfg.finetune.surrogate_depth = std::stoi(value);
    else if (k == "finetune.generator_lr") cfg.finetune.generator_lr = std::stod(value);
    else if (k == "finetune.image_weight") cfg.finetune.image_weight = std::stod(value);
    else if (k == "finetune.epochs") cfg.finetune.epochs = std::stoi(value);
    else if (k == "finetune.batch_size") cfg.finetune.batch_size = std::stoi(value);
    else if (k == "defense.enabled") cfg.defense_enabled = parse_bool(value);
    else if (k == "defense.n_samples") cfg.smoothing.n_samples = std::stoi(value);
    else if (k == "defense.box_width") cfg.smoothing.box_width = std::stoi(value);
    else if (k == "defense.beta") cfg.smoothing.noise_amplitude = std::stof(value);
    else if (k == "policy.tau_low") cfg.policy.tau_low = std::stod(value);
    else if (k == "policy.tau_high") cfg.policy.tau_high = std::stod(value);
    else if (k == "run.global_seed") cfg.global_seed = std::stoull(value);
    else if (k == "run.out_dir") cfg.out_dir = value;
    else if (k == "run.eval_count") cfg.eval_count = std::stoi(value);
    else throw std::invalid_argument("config: unknown key '" + k + "'");
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    ExperimentConfig cfg = default_config();
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) +
                                     " is not key=value");
        apply_config_line(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

} // namespace wmlab::bench
