#include "wmlab/bench.hpp"

#include "wmlab/rng.hpp"

#include <filesystem>
#include <stdexcept>

namespace wmlab::bench {

namespace fs = std::filesystem;

namespace {

// Clean procedural renders for a named corpus; prompt namespaces keep the
// defender's and the attacker's data disjoint.
std::vector<img::Image> render_corpus(const ExperimentConfig& cfg, const std::string& name,
                                      int count) {
    Rng rng(derive_seed(cfg.global_seed, "corpus/" + name));
    std::vector<img::Image> images;
    images.reserve(size_t(count));
    for (int i = 0; i < count; ++i) {
        gen::GenerationRequest req;
        req.prompt = name + " scene " + std::to_string(i);
        req.seed = rng.next_u64();
        req.steps = cfg.steps_list[size_t(i) % cfg.steps_list.size()];
        images.push_back(gen::render_base(req, cfg.image_size));
    }
    return images;
}

} // namespace

std::vector<img::Image> pretrain_corpus(const ExperimentConfig& cfg) {
    return render_corpus(cfg, "pretrain", cfg.pretrain_images);
}

std::vector<img::Image> attacker_corpus(const ExperimentConfig& cfg) {
    return render_corpus(cfg, "attacker", cfg.pretrain_images);
}

std::vector<gen::GenerationRequest> attacker_requests(const ExperimentConfig& cfg, int count) {
    Rng rng(derive_seed(cfg.global_seed, "attacker/requests"));
    std::vector<gen::GenerationRequest> reqs;
    reqs.reserve(size_t(count));
    for (int i = 0; i < count; ++i) {
        gen::GenerationRequest req;
        req.prompt = "attacker style " + std::to_string(i % 12);
        req.seed = rng.next_u64();
        req.steps = cfg.steps_list[size_t(i) % cfg.steps_list.size()];
        reqs.push_back(std::move(req));
    }
    return reqs;
}

LabContext build_lab(const ExperimentConfig& cfg) {
    LabContext lab;
    lab.cfg = cfg;

    wm::EmbedTrainConfig tc;
    tc.decoder_lr = cfg.decoder_lr;
    tc.generator_lr = cfg.generator_lr;
    tc.image_weight = cfg.image_weight;
    tc.epochs = cfg.pretrain_epochs;
    tc.batch_size = cfg.batch_size;
    tc.target_bit_acc = cfg.target_bit_acc;

    auto pre = wm::pretrain_decoder(pretrain_corpus(cfg), cfg.message_length, cfg.decoder_depth,
                                    tc, derive_seed(cfg.global_seed, "defender/pretrain"));
    lab.pretrain_acc = pre.train_bit_acc;
    lab.encoder.emplace(std::move(pre.encoder));
    lab.decoder.emplace(std::move(pre.decoder));

    lab.m0 = wm::random_message(cfg.message_length, derive_seed(cfg.global_seed, "defender/m0"));

    // embedding requests: full corpus grid
    for (const auto& prompt : cfg.prompts)
        for (uint64_t seed : cfg.seeds)
            for (int steps : cfg.steps_list)
                lab.embed_requests.push_back({prompt, seed, steps});

    // held-out evaluation requests: same prompts, disjoint seed range
    for (int i = 0; lab.eval_requests.size() < size_t(cfg.eval_count); ++i) {
        const auto& prompt = cfg.prompts[size_t(i) % cfg.prompts.size()];
        const uint64_t seed = 1000 + uint64_t(i);
        const int steps = cfg.steps_list[size_t(i / cfg.prompts.size()) % cfg.steps_list.size()];
        lab.eval_requests.push_back({prompt, seed, steps});
    }

    lab.clean_model = gen::GeneratorModel::zeros(cfg.image_size);
    auto init = gen::GeneratorModel::random_init(derive_seed(cfg.global_seed, "defender/ginit"),
                                                 cfg.image_size);

    tc.epochs = cfg.embed_epochs;
    auto emb = wm::embed_watermark_into_generator(init, *lab.decoder, lab.m0,
                                                  lab.embed_requests, tc);
    lab.embed_val_acc = emb.val_bit_acc;
    lab.embed_psnr = emb.mean_psnr_vs_base;
    lab.wm_model = std::move(emb.model);

    for (const auto& req : lab.eval_requests) {
        lab.base_eval_images.push_back(gen::render_base(req, cfg.image_size));
        lab.wm_eval_images.push_back(gen::generate(req, lab.wm_model));
    }
    return lab;
}

void save_lab(const LabContext& lab, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "checkpoints");
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "reports");
    lab.decoder->save((fs::path(dir) / "checkpoints" / "decoder.ck").string());
    lab.encoder->save((fs::path(dir) / "checkpoints" / "encoder.ck").string());
    lab.clean_model.save((fs::path(dir) / "checkpoints" / "generator_clean.ck").string());
    lab.wm_model.save((fs::path(dir) / "checkpoints" / "generator_wm.ck").string());
    wm::save_message(lab.m0, (fs::path(dir) / "checkpoints" / "message.txt").string());
    for (size_t i = 0; i < lab.wm_eval_images.size(); ++i)
        img::save_image(lab.wm_eval_images[i],
                        (fs::path(dir) / "images" / ("eval_wm_" + std::to_string(i) + ".png"))
                            .string());
}

LabContext load_lab(const ExperimentConfig& cfg, const std::string& dir) {
    LabContext lab;
    lab.cfg = cfg;
    lab.decoder.emplace(
        wm::WatermarkDecoder::load((fs::path(dir) / "checkpoints" / "decoder.ck").string()));
    lab.encoder.emplace(
        wm::WatermarkEncoder::load((fs::path(dir) / "checkpoints" / "encoder.ck").string()));
    lab.clean_model =
        gen::GeneratorModel::load((fs::path(dir) / "checkpoints" / "generator_clean.ck").string());
    lab.wm_model =
        gen::GeneratorModel::load((fs::path(dir) / "checkpoints" / "generator_wm.ck").string());
    lab.m0 = wm::load_message((fs::path(dir) / "checkpoints" / "message.txt").string());

    for (const auto& prompt : cfg.prompts)
        for (uint64_t seed : cfg.seeds)
            for (int steps : cfg.steps_list)
                lab.embed_requests.push_back({prompt, seed, steps});
    for (int i = 0; lab.eval_requests.size() < size_t(cfg.eval_count); ++i) {
        const auto& prompt = cfg.prompts[size_t(i) % cfg.prompts.size()];
        const uint64_t seed = 1000 + uint64_t(i);
        const int steps = cfg.steps_list[size_t(i / cfg.prompts.size()) % cfg.steps_list.size()];
        lab.eval_requests.push_back({prompt, seed, steps});
    }
    for (const auto& req : lab.eval_requests) {
        lab.base_eval_images.push_back(gen::render_base(req, cfg.image_size));
        lab.wm_eval_images.push_back(gen::generate(req, lab.wm_model));
    }
    return lab;
}

} // namespace wmlab::bench
