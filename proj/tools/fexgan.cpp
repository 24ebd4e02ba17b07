#include <CLI11.hpp>
#include <torch/torch.h>

#include <csignal>
#include <fstream>
#include <iostream>

#include "fexgan/checkpoint.hpp"
#include "fexgan/corpus.hpp"
#include "fexgan/errors.hpp"
#include "fexgan/eval.hpp"
#include "fexgan/service.hpp"
#include "fexgan/tensor_image.hpp"
#include "fexgan/trainer.hpp"

namespace fs = std::filesystem;
using namespace fexgan;

namespace {

// "anger:0.5,sadness:0.5"
BlendSpec parse_blend(const std::string& text, double lambda) {
  BlendSpec spec;
  spec.lambda = lambda;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw DomainError("blend entry '" + item + "' is not name:weight");
    spec.weights[affect_from_name(item.substr(0, colon))] = std::stod(item.substr(colon + 1));
  }
  spec.validate();
  return spec;
}

struct EvalContext {
  std::shared_ptr<NetworkModel> model;
  TrainConfig cfg;
};

EvalContext open_checkpoint(const fs::path& ckpt) {
  const auto data = read_checkpoint(ckpt);
  EvalContext ctx;
  auto [gen, disc] = load_models(data, &ctx.cfg);
  ctx.model = std::make_shared<NetworkModel>(gen, disc, data.get("meta.step").item<int64_t>());
  return ctx;
}

std::shared_ptr<const TrainingData> open_corpus(const EvalContext& ctx, const std::string& corpus) {
  const std::string root = corpus.empty() ? ctx.cfg.corpus_root : corpus;
  if (root.empty()) throw DomainError("no corpus: pass --corpus or train with corpus_root set");
  return TrainingData::load(root, ctx.cfg.image_size, ctx.cfg.val_fraction, ctx.cfg.seed);
}

std::vector<int> identities_of(const std::vector<SampleRecord>& records) {
  std::vector<int> ids;
  for (const auto& r : records) {
    if (ids.empty() || ids.back() != r.identity_id) ids.push_back(r.identity_id);
  }
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);

  CLI::App app{"Affect-conditioned face generation: corpus synthesis, training, evaluation and serving", "fexgan"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-corpus", "Render the procedural face corpus");
  CorpusSpec spec;
  std::string corpus_out;
  int workers = 1;
  gen->add_option("--identities", spec.n_identities, "Number of identities")->capture_default_str();
  gen->add_option("--frames", spec.frames_per_pair, "Frames per (identity, affect)")->capture_default_str();
  gen->add_option("--size", spec.image_size, "Image side in pixels (power of two >= 32)")->capture_default_str();
  gen->add_option("--seed", spec.corpus_seed, "Corpus seed")->capture_default_str();
  gen->add_option("--out", corpus_out, "Output directory")->required();
  gen->add_option("--workers", workers, "Render threads")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Train from a key = value config file");
  std::string config_path, resume_path;
  train_cmd->add_option("--config", config_path, "Training config")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--resume", resume_path, "Checkpoint to resume from")->check(CLI::ExistingFile);

  auto* eval_cmd = app.add_subcommand("eval", "Accuracy table and result grids");
  std::string eval_mode, ckpt, eval_out, eval_corpus;
  std::uint64_t eval_seed = 1;
  int grid_n = 64;
  std::vector<std::string> blends;
  double blend_lambda = 0.0;
  eval_cmd->add_option("mode", eval_mode, "table | random | transform | hybrid")
      ->required()
      ->check(CLI::IsMember({"table", "random", "transform", "hybrid"}));
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "Output directory")->required();
  eval_cmd->add_option("--seed", eval_seed, "Sampling seed")->capture_default_str();
  eval_cmd->add_option("--corpus", eval_corpus, "Corpus root (default: the one in the checkpoint config)");
  eval_cmd->add_option("--n", grid_n, "Cells in the random grid")->capture_default_str();
  eval_cmd->add_option("--blend", blends, "Hybrid as name:weight,name:weight (repeatable)");
  eval_cmd->add_option("--lambda", blend_lambda, "Lambda for hybrids")->capture_default_str();

  auto* serve_cmd = app.add_subcommand("serve", "HTTP inference service");
  std::string serve_config;
  ServiceConfig scfg;
  serve_cmd->add_option("--config", serve_config, "Service config file")->check(CLI::ExistingFile);
  serve_cmd->add_option("--ckpt", scfg.checkpoint, "Checkpoint (overrides the config)");
  serve_cmd->add_option("--host", scfg.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", scfg.port, "Port (0 picks a free one)")->capture_default_str();
  serve_cmd->add_option("--corpus", scfg.corpus_root, "Corpus root for /identities");

  auto* tf = app.add_subcommand("transform", "One-shot image transform");
  std::string tf_in, tf_out, tf_affect, tf_source = "neutral";
  double tf_lambda = 0.0;
  tf->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  tf->add_option("--in", tf_in, "Source PNG")->required()->check(CLI::ExistingFile);
  tf->add_option("--affect", tf_affect, "Target affect name")->required();
  tf->add_option("--source-affect", tf_source, "Affect shown in the source")->capture_default_str();
  tf->add_option("--lambda", tf_lambda, "Target intensity")->capture_default_str();
  tf->add_option("--out", tf_out, "Output PNG")->required();

  if (argc < 2) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) {
      const auto manifest = gen_corpus(spec, corpus_out, workers);
      std::cout << "wrote " << manifest.records.size() << " images to " << corpus_out << '\n';
    } else if (*train_cmd) {
      const auto cfg = TrainConfig::from_file(config_path);
      std::optional<fs::path> resume;
      if (!resume_path.empty()) resume = resume_path;
      const auto result = train(cfg, resume, nullptr, &std::cout);
      std::cout << "final checkpoint " << result.final_checkpoint.string() << " ("
                << file_checksum(result.final_checkpoint) << ")\n";
    } else if (*eval_cmd) {
      const auto ctx = open_checkpoint(ckpt);
      fs::create_directories(eval_out);
      const fs::path out(eval_out);
      if (eval_mode == "random") {
        random_grid(*ctx.model, grid_n, eval_seed).write(out / "random.png");
        std::cout << "wrote " << (out / "random.png").string() << '\n';
      } else {
        const auto data = open_corpus(ctx, eval_corpus);
        const auto val = LabeledImages::from(data->val_images, data->val);
        if (eval_mode == "table") {
          const auto train_set = LabeledImages::from(data->train_images, data->train);
          const auto table = accuracy_table(*ctx.model, train_set, val, eval_seed);
          std::ofstream(out / "accuracy.csv") << table.to_csv();
          std::cout << table.to_csv();
        } else {
          const auto ids = identities_of(data->val);
          const auto sources = neutral_sources(val, ids);
          if (eval_mode == "transform") {
            const auto g = transform_grid(*ctx.model, sources);
            g.grid.write(out / "transform.png");
            std::cout << "agreement " << g.agreement << ", diagonal rows " << g.diagonal_rows << '/'
                      << g.grid.rows << '\n';
          } else {
            std::vector<BlendSpec> specs;
            for (const auto& b : blends) specs.push_back(parse_blend(b, blend_lambda));
            if (specs.empty()) {
              specs = default_hybrids();
              for (auto& s : specs) s.lambda = blend_lambda;
            }
            const auto g = hybrid_grid(*ctx.model, sources, specs);
            g.grid.write(out / "hybrid.png");
            std::cout << "soft consistency " << g.soft_consistency << '\n';
          }
        }
      }
    } else if (*serve_cmd) {
      ServiceConfig cfg = scfg;
      if (!serve_config.empty()) {
        cfg = ServiceConfig::from_file(serve_config);
        if (!scfg.checkpoint.empty()) cfg.checkpoint = scfg.checkpoint;
        if (!scfg.corpus_root.empty()) cfg.corpus_root = scfg.corpus_root;
        if (serve_cmd->count("--host")) cfg.host = scfg.host;
        if (serve_cmd->count("--port")) cfg.port = scfg.port;
      }
      auto service = make_service(cfg);
      HttpServer server(service, cfg);
      const int port = server.start();
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << cfg.host << ':' << port << std::endl;
      server.wait();
    } else if (*tf) {
      const auto ctx = open_checkpoint(ckpt);
      const auto src = preprocess(read_png(tf_in), ctx.model->image_size()).unsqueeze(0);
      const auto as = one_hot(affect_from_name(tf_source));
      const auto at = modulate(affect_from_name(tf_affect), tf_lambda, 0.1);
      const auto out = ctx.model->transform(src, affect_tensor(std::span(&as, 1)), affect_tensor(std::span(&at, 1)));
      write_png(tf_out, to_image(out[0]));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
