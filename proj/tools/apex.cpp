// apex: corpus generation, training, evaluation, extraction and serving.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "apex/core/calibration.hpp"
#include "apex/core/errors.hpp"
#include "apex/core/grid.hpp"
#include "apex/data/corpus.hpp"
#include "apex/data/image_io.hpp"
#include "apex/nn/checkpoint.hpp"
#include "apex/pipeline/extract.hpp"
#include "apex/service/service.hpp"
#include "apex/train/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw apex::DataError("cannot write " + path);
}

apex::service::HttpServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plot data extraction: synthetic corpus, training, inference and export"};
  app.require_subcommand(1);

  // gen
  std::size_t gen_count = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  std::string gen_config;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic plot corpus");
  gen->add_option("--count", gen_count, "Number of examples")->required();
  gen->add_option("--seed", gen_seed, "Base seed; example i uses seed + i")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--config", gen_config, "Generator config JSON")->check(CLI::ExistingFile);

  // train
  apex::train::TrainConfig train_cfg;
  std::string train_corpus;
  std::string train_out;
  auto* train = app.add_subcommand("train", "Train the network on a corpus");
  train->add_option("--corpus", train_corpus, "Corpus directory")->required();
  train->add_option("--out", train_out, "Checkpoint directory")->required();
  train->add_option("--epochs", train_cfg.epochs, "Epochs")->capture_default_str();
  train->add_option("--batch", train_cfg.batch_size, "Batch size")->capture_default_str();
  train->add_option("--lr", train_cfg.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--seed", train_cfg.seed, "Seed")->capture_default_str();

  // eval
  std::string eval_corpus;
  std::string eval_ckpt;
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the corpus test split");
  eval->add_option("--corpus", eval_corpus, "Corpus directory")->required();
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--out", eval_out, "Report JSON path")->required();

  // extract
  std::string ex_image;
  std::string ex_ckpt;
  std::string ex_out;
  std::string ex_xscale = "linear";
  std::string ex_yscale = "linear";
  apex::AxisCalibration calib;
  auto* extract = app.add_subcommand("extract", "Extract curves from a plot image into CSV");
  extract->add_option("--image", ex_image, "Plot image (PNG/JPEG)")->required();
  extract->add_option("--checkpoint", ex_ckpt, "Checkpoint file")->required();
  extract->add_option("--xmin", calib.x_min, "x axis minimum")->required();
  extract->add_option("--xmax", calib.x_max, "x axis maximum")->required();
  extract->add_option("--ymin", calib.y_min, "y axis minimum")->required();
  extract->add_option("--ymax", calib.y_max, "y axis maximum")->required();
  extract->add_option("--xscale", ex_xscale, "linear or log")->check(CLI::IsMember({"linear", "log"}));
  extract->add_option("--yscale", ex_yscale, "linear or log")->check(CLI::IsMember({"linear", "log"}));
  extract->add_option("--out", ex_out, "CSV output path")->required();

  // serve
  apex::service::ServiceConfig serve_cfg = apex::service::ServiceConfig::from_environment();
  std::string serve_ckpt;
  int serve_port = serve_cfg.port;
  auto* serve = app.add_subcommand("serve", "Run the HTTP extraction service");
  serve->add_option("--checkpoint", serve_ckpt, "Checkpoint file")->envname("APEX_CHECKPOINT")->required();
  serve->add_option("--port", serve_port, "Port")->envname("APEX_PORT")->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) {
      apex::data::GeneratorConfig cfg;
      if (!gen_config.empty()) {
        std::ifstream in(gen_config);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          throw apex::InvalidArgument(std::string("generator config is not valid JSON: ") + e.what(), "config");
        }
        cfg = apex::data::GeneratorConfig::from_json(j);
      }
      const auto manifest = apex::data::generate_corpus(gen_count, gen_seed, gen_out, cfg);
      std::cout << "wrote " << manifest.entries.size() << " examples ("
                << manifest.split(apex::data::Split::Train).size() << " train, "
                << manifest.split(apex::data::Split::Test).size() << " test) to " << gen_out << "\n";
    } else if (*train) {
      train_cfg.corpus = train_corpus;
      train_cfg.checkpoint_dir = train_out;
      std::size_t last_epoch = 0;
      const auto result = apex::train::train(train_cfg, [&](const apex::train::StepRecord& r) {
        if (r.epoch != last_epoch) {
          last_epoch = r.epoch;
          std::cerr << "epoch " << r.epoch << "\n";
        }
        std::cerr << "  step " << r.step << " loss_plot " << r.loss_plot << " loss_score "
                  << r.loss_score << "\n";
      });
      std::cout << "checkpoint " << result.checkpoint.string() << "\n"
                << "log " << result.log.string() << "\n";
    } else if (*eval) {
      const auto report = apex::train::evaluate(eval_ckpt, eval_corpus);
      write_file(eval_out, report.to_json().dump(2) + "\n");
      std::cout << report.to_json().dump() << "\n";
    } else if (*extract) {
      calib.x_scale = apex::parse_axis_scale(ex_xscale, "x_scale");
      calib.y_scale = apex::parse_axis_scale(ex_yscale, "y_scale");
      apex::validate_calibration(calib);
      const auto net = apex::nn::load_checkpoint(ex_ckpt);
      const auto image = apex::data::read_image(ex_image);
      const auto result = apex::pipeline::extract(image, net);
      const auto grid = apex::make_sample_grid(net.config().points_per_plot);
      write_file(ex_out, apex::pipeline::export_csv(result, grid, calib, /*allow_empty=*/true));
      if (result.empty()) {
        std::cout << "no curve scored above 0.5; wrote the x column only\n";
      } else {
        std::cout << "kept " << result.size() << " curve(s):";
        for (std::size_t i = 0; i < result.size(); ++i) {
          std::printf(" #%zu (%.3f)", result.kept_indices[i], result.kept_scores[i]);
        }
        std::cout << "\n";
      }
    } else if (*serve) {
      serve_cfg.checkpoint = serve_ckpt;
      serve_cfg.port = serve_port;
      apex::service::HttpServer server(serve_cfg);
      const int port = server.bind();
      if (port < 0) {
        std::cerr << "apex serve: cannot bind " << serve_cfg.host << ":" << serve_cfg.port << "\n";
        return kExitData;
      }
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cerr << "listening on " << serve_cfg.host << ":" << port << "\n";
      server.listen();
      g_server = nullptr;
    }
  } catch (const apex::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const apex::TrainingAborted& e) {
    std::cerr << "error: " << e.what() << " (last good checkpoint: " << e.last_good_checkpoint() << ")\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
