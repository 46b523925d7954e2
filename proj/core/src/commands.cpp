#include "tdet/commands.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "tdet/checkpoint.hpp"
#include "tdet/dataset.hpp"
#include "tdet/detect.hpp"
#include "tdet/gradcheck.hpp"
#include "tdet/overlay.hpp"
#include "tdet/parallel.hpp"
#include "tdet/pnm.hpp"
#include "tdet/toy.hpp"
#include "tdet/train.hpp"
#include "tdet/turbulence.hpp"

namespace tdet::cli {

namespace fs = std::filesystem;

namespace {

// Maps the library's error types onto exit codes.
int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

void require_path(const fs::path& p, const char* key) {
  if (p.empty()) throw ConfigError(std::string("missing required setting '") + key + "'");
}

void prepare_out_dir(const fs::path& dir) {
  require_path(dir, "out_dir");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DatasetError("cannot create output directory " + dir.string() +
                       (ec ? ": " + ec.message() : ""));
  }
  const fs::path probe = dir / ".tdet_write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw DatasetError("output directory not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

std::string provenance(std::string_view command, const RunConfig& config) {
  return provenance_text(command, config.seed, config_hash(config)) + "# config\n" +
         config.to_text(false);
}

}  // namespace

int cmd_gen_toy(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    prepare_out_dir(config.out_dir);
    const std::string prov = provenance("gen-toy", config);
    const auto& names = toy::class_names();
    const int size = config.toy.image_size;
    write_dataset(config.out_dir / "train", names,
                  toy::make_toy_split(derive_seed(config.seed, toy::kTrainStream),
                                      config.toy.train_images, size),
                  prov);
    write_dataset(config.out_dir / "test", names,
                  toy::make_toy_split(derive_seed(config.seed, toy::kTestStream),
                                      config.toy.test_images, size),
                  prov);
    write_text_file(config.out_dir / "provenance.txt", prov);
    out << "wrote " << config.toy.train_images << " train and " << config.toy.test_images
        << " test images to " << config.out_dir.string() << '\n';
    return kExitOk;
  });
}

int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    require_path(config.data_dir, "data_dir");
    const Dataset ds = load_dataset(config.data_dir);
    std::vector<DatasetImage> result(ds.entries.size());
    parallel_for(ds.entries.size(), [&](std::size_t i) {
      turbulence::DegradeConfig dc = config.degrade;
      dc.seed = config.seed ^ static_cast<std::uint64_t>(i);
      turbulence::Degraded d = turbulence::degrade(ds.read_image(i), ds.entries[i].boxes, dc);
      result[i] = {ds.entries[i].file, std::move(d.image), std::move(d.boxes)};
    });
    prepare_out_dir(config.out_dir);
    write_dataset(config.out_dir, ds.class_names, result, provenance("synth", config));
    out << "degraded " << result.size() << " images into " << config.out_dir.string() << '\n';
    return kExitOk;
  });
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    require_path(config.data_dir, "data_dir");
    const Dataset ds = load_dataset(config.data_dir);
    if (ds.entries.empty()) throw DatasetError("training set has no images");
    if (static_cast<std::size_t>(config.model.num_classes) != ds.class_names.size()) {
      throw ConfigError("model.num_classes=" + std::to_string(config.model.num_classes) +
                        " but the dataset has " + std::to_string(ds.class_names.size()) +
                        " classes");
    }
    std::vector<TrainExample> data;
    for (std::size_t i = 0; i < ds.entries.size(); ++i) {
      data.push_back(make_example(ds.read_image(i), ds.entries[i].boxes));
    }
    prepare_out_dir(config.out_dir);
    write_text_file(config.out_dir / "provenance.txt", provenance("train", config));
    std::ofstream log(config.out_dir / "loss_log.csv", std::ios::binary | std::ios::trunc);
    if (!log) throw DatasetError("cannot write loss log in " + config.out_dir.string());
    model::Detector detector(config.model, config.seed);
    const auto steps = train_detector(detector, data, config, &log);
    save_checkpoint(config.out_dir / "model.ckpt", detector.parameters());
    out << "trained " << steps.size() << " steps; final loss " << steps.back().total << '\n';
    return kExitOk;
  });
}

int cmd_detect(const RunConfig& config, bool overlay, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    require_path(config.checkpoint, "checkpoint");
    require_path(config.data_dir, "data_dir");
    const model::Detector detector = detector_from_checkpoint(config.checkpoint);
    const Dataset ds = load_dataset(config.data_dir);
    std::vector<Image> images;
    for (std::size_t i = 0; i < ds.entries.size(); ++i) images.push_back(ds.read_image(i));
    std::vector<std::vector<Detection>> dets(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
      dets[i] = detect_image(detector, images[i], config.detect);
    });
    prepare_out_dir(config.out_dir);
    std::vector<eval::ImageDetection> rows;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      for (const Detection& d : dets[i]) rows.push_back({ds.entries[i].file, d});
    }
    write_text_file(config.out_dir / "detections.csv", detections_csv(rows));
    if (overlay) {
      const fs::path dir = config.out_dir / "overlays";
      fs::create_directories(dir);
      for (std::size_t i = 0; i < images.size(); ++i) {
        fs::path name = fs::path(ds.entries[i].file).filename();
        name.replace_extension(".ppm");
        write_pnm(dir / name, render_overlay(images[i], dets[i]));
      }
    }
    write_text_file(config.out_dir / "provenance.txt", provenance("detect", config));
    out << "wrote " << rows.size() << " detections for " << images.size() << " images\n";
    return kExitOk;
  });
}

int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    require_path(config.detections, "detections");
    require_path(config.data_dir, "data_dir");
    std::vector<eval::ImageDetection> dets;
    try {
      dets = parse_detections_csv(read_text_file(config.detections));
    } catch (const DatasetError& e) {
      throw DatasetError(config.detections.string() + ": " + e.what());
    }
    const Dataset ds = load_dataset(config.data_dir);
    for (const auto& d : dets) {
      if (d.det.class_id >= static_cast<int>(ds.class_names.size())) {
        throw DatasetError("detection class_id " + std::to_string(d.det.class_id) +
                           " outside class table");
      }
    }
    const eval::EvalReport report = eval::evaluate(dets, ds.annotations(), config.eval);
    const std::string table = eval::report_table(report, ds.class_names);
    prepare_out_dir(config.out_dir);
    write_text_file(config.out_dir / "report.csv", eval::report_csv(report, ds.class_names));
    write_text_file(config.out_dir / "report.txt", table);
    write_text_file(config.out_dir / "provenance.txt", provenance("eval", config));
    out << table;
    return kExitOk;
  });
}

int cmd_gradcheck(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    GradCheckOptions opt;
    opt.seed = config.seed;
    opt.eps = config.gradcheck_eps;
    bool ok = true;
    for (const std::string& op : gradcheck_ops()) {
      const GradCheckReport r = finite_diff_check(op, opt);
      const bool pass = r.max_rel_error < kGradCheckTolerance;
      ok = ok && pass;
      char line[160];
      std::snprintf(line, sizeof line, "%-18s max_rel_error=%.3e checked=%zu %s\n", op.c_str(),
                    r.max_rel_error, r.checked, pass ? "ok" : "FAIL");
      out << line;
    }
    return ok ? kExitOk : kExitGradcheck;
  });
}

}  // namespace tdet::cli
