#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "pcvox/config.hpp"
#include "pcvox/dataset.hpp"
#include "pcvox/ply_io.hpp"
#include "pcvox/report.hpp"
#include "pcvox/training.hpp"

namespace fs = std::filesystem;
using namespace pcvox;

namespace {

// Folds leftover "--key value" / "--key=value" tokens into the config, so
// every config key doubles as a flag.
void apply_overrides(Config& cfg, std::vector<std::string> extras) {
  for (size_t i = 0; i < extras.size(); ++i) {
    std::string tok = extras[i];
    if (tok.rfind("--", 0) != 0)
      throw ConfigError("unrecognized argument: " + tok);
    tok = tok.substr(2);
    size_t eq = tok.find('=');
    if (eq != std::string::npos) {
      cfg.set(tok.substr(0, eq), tok.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("flag --" + tok + " needs a value");
      cfg.set(tok, extras[++i]);
    }
  }
}

Config make_config(const std::string& path, std::vector<std::string> extras) {
  Config cfg = path.empty() ? Config{} : Config::load(path);
  apply_overrides(cfg, std::move(extras));
  return cfg;
}

DatasetSpec dataset_spec_from(const Config& cfg) {
  DatasetSpec spec;
  spec.depth = cfg.get_int("data.depth", 8);
  spec.rotate = cfg.get_bool("data.rotate", true);
  double density = cfg.get_double("data.density", 4.0);
  double lo = cfg.get_double("data.size_lo", 10.0);
  double hi = cfg.get_double("data.size_hi", 24.0);
  auto family = [&](ShapeFamily f, const char* key) {
    int count = cfg.get_int(key, 0);
    if (count > 0) spec.shapes.push_back({f, count, density, lo, hi});
  };
  family(ShapeFamily::Sphere, "data.spheres");
  family(ShapeFamily::Torus, "data.tori");
  family(ShapeFamily::Superquadric, "data.superquadrics");
  family(ShapeFamily::BoxUnion, "data.boxes");
  if (spec.shapes.empty())
    spec.shapes = {{ShapeFamily::Sphere, 4, density, lo, hi},
                   {ShapeFamily::Torus, 4, density, lo, hi}};
  return spec;
}

nn::SurrogateConfig surrogate_config_from(const Config& cfg) {
  nn::SurrogateConfig sc;
  sc.channels = cfg.get_int("surrogate.channels", 32);
  sc.extraction_blocks = cfg.get_int("surrogate.extraction_blocks", 2);
  sc.extraction_inception = cfg.get_bool("surrogate.inception", true);
  sc.aggregation_blocks = cfg.get_int("surrogate.aggregation_blocks", 2);
  sc.coarse_levels = cfg.get_int("surrogate.coarse_levels", 2);
  sc.seed = cfg.get_u64("surrogate.seed", 1);
  return sc;
}

nn::VoxNetConfig voxnet_config_from(const Config& cfg) {
  nn::VoxNetConfig vc;
  vc.channels = cfg.get_int("voxnet.channels", 32);
  vc.extraction_blocks = cfg.get_int("voxnet.extraction_blocks", 2);
  vc.seed = cfg.get_u64("voxnet.seed", 2);
  return vc;
}

nn::TrainSchedule schedule_from(const Config& cfg, int default_epochs) {
  nn::TrainSchedule sched;
  sched.epochs = cfg.get_int("train.epochs", default_epochs);
  sched.batch_size = cfg.get_int("train.batch_size", 8);
  sched.lr = cfg.get_double("train.lr", 1e-4);
  sched.lr_decay = cfg.get_double("train.lr_decay", 0.5);
  sched.lr_decay_every = cfg.get_int("train.lr_decay_every", 5);
  sched.shuffle_seed = cfg.get_u64("train.shuffle_seed", 7);
  return sched;
}

std::vector<std::string> sorted_ply_files(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ply")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .ply files under " + dir);
  return files;
}

std::vector<VoxelCloud> load_voxel_clouds(const std::string& dir, int depth) {
  std::vector<VoxelCloud> clouds;
  for (const std::string& f : sorted_ply_files(dir))
    clouds.push_back(quantize(read_ply(f), 1.0, depth));
  return clouds;
}

void write_loss_log(const std::string& path, const std::vector<nn::EpochLog>& log) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::binary);
  out << "epoch,loss,lr\n";
  for (const nn::EpochLog& e : log)
    out << e.epoch << "," << format_double(e.loss) << "," << format_double(e.lr) << "\n";
}

int cmd_synth_data(const Config& cfg) {
  std::string out_dir = cfg.get_str("data.out", "data");
  uint64_t seed = cfg.get_u64("seed", 1);
  DatasetSpec spec = dataset_spec_from(cfg);
  std::vector<VoxelCloud> clouds = synth_dataset(spec, seed);
  fs::create_directories(out_dir);
  for (size_t i = 0; i < clouds.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "cloud_%04zu.ply", i);
    write_ply(clouds[i], out_dir + "/" + name, PlyFormat::BinaryLittleEndian);
  }
  std::cout << "wrote " << clouds.size() << " clouds to " << out_dir << "\n";
  return 0;
}

int cmd_train_surrogate(const Config& cfg) {
  std::string data_dir = cfg.get_str("data.dir", "data");
  std::string out = cfg.get_str("out", "surrogate.pvnn");
  int depth = cfg.get_int("data.depth", 8);
  std::vector<VoxelCloud> clouds = load_voxel_clouds(data_dir, depth);
  nn::SurrogateModel model(surrogate_config_from(cfg));
  nn::TrainOutcome outcome = train_surrogate(model, clouds, schedule_from(cfg, 10));
  outcome.checkpoint.save(out);
  write_loss_log(cfg.get_str("log", ""), outcome.log);
  for (const nn::EpochLog& e : outcome.log)
    std::cout << "epoch " << e.epoch << " loss " << format_double(e.loss) << " lr "
              << format_double(e.lr) << "\n";
  if (outcome.diverged) {
    std::cerr << "training diverged; kept the last good checkpoint\n";
    return 2;
  }
  std::cout << "saved " << out << "\n";
  return 0;
}

int cmd_train_voxnet(const Config& cfg) {
  std::string data_dir = cfg.get_str("data.dir", "data");
  std::string surrogate_path = cfg.get_str("surrogate", "surrogate.pvnn");
  std::string out = cfg.get_str("out", "voxnet.pvnn");
  int depth = cfg.get_int("data.depth", 8);
  double lambda = cfg.get_double("train.lambda", 1.0);
  std::vector<VoxelCloud> clouds = load_voxel_clouds(data_dir, depth);
  nn::SurrogateModel surrogate =
      nn::SurrogateModel::from_checkpoint(nn::Checkpoint::load(surrogate_path));
  surrogate.set_frozen(true);
  nn::VoxNetModel model(voxnet_config_from(cfg));
  nn::TrainOutcome outcome =
      train_voxnet(model, surrogate, clouds, lambda, schedule_from(cfg, 30));
  outcome.checkpoint.save(out);
  write_loss_log(cfg.get_str("log", ""), outcome.log);
  for (const nn::EpochLog& e : outcome.log)
    std::cout << "epoch " << e.epoch << " loss " << format_double(e.loss) << " lr "
              << format_double(e.lr) << "\n";
  if (outcome.diverged) {
    std::cerr << "training diverged; kept the last good checkpoint\n";
    return 2;
  }
  std::cout << "saved " << out << "\n";
  return 0;
}

int cmd_encode(const std::string& in, const std::string& out, double scale, int depth,
               const std::string& codec, const std::string& model_path) {
  VoxelCloud vc = quantize(read_ply(in), scale, depth);
  Bitstream bs;
  if (codec == "octree") {
    bs = octree_encode(vc, float(scale));
  } else if (codec == "surrogate") {
    if (model_path.empty()) throw ConfigError("surrogate codec needs --model");
    nn::SurrogateModel model =
        nn::SurrogateModel::from_checkpoint(nn::Checkpoint::load(model_path));
    bs = nn::surrogate_encode(model, vc, float(scale));
  } else {
    throw ConfigError("unknown codec: " + codec);
  }
  bs.save(out);
  std::cout << "encoded " << vc.coords.size() << " voxels, " << bs.payload.size()
            << " payload bytes (" << format_double(bits_per_point(bs, vc.coords.size()))
            << " bpp)\n";
  return 0;
}

int cmd_decode(const std::string& in, const std::string& out, const std::string& model_path,
               const std::string& format) {
  Bitstream bs = Bitstream::load(in);
  VoxelCloud vc;
  if (bs.header.codec_id == kCodecOctree) {
    vc = octree_decode(bs);
  } else if (bs.header.codec_id == kCodecSurrogate) {
    if (model_path.empty()) throw ConfigError("surrogate stream needs --model");
    nn::SurrogateModel model =
        nn::SurrogateModel::from_checkpoint(nn::Checkpoint::load(model_path));
    vc = nn::surrogate_decode(model, bs);
  } else {
    throw IntegrityError("unknown codec id in stream");
  }
  write_ply(vc, out, format == "ascii" ? PlyFormat::Ascii : PlyFormat::BinaryLittleEndian);
  std::cout << "decoded " << vc.coords.size() << " voxels to " << out << "\n";
  return 0;
}

int cmd_voxelize(const std::string& model_path, const std::string& in, const std::string& out,
                 double scale, int depth) {
  nn::VoxNetModel model = nn::VoxNetModel::from_checkpoint(nn::Checkpoint::load(model_path));
  PointCloud pc = read_ply(in);
  nn::VoxelizeResult res = model.voxelize(pc, scale, depth);
  if (res.fallback)
    std::cerr << "warning: all candidates classified unoccupied; emitted the scaled cloud\n";
  write_ply(res.cloud, out, PlyFormat::BinaryLittleEndian);
  nn::EditStats edits = nn::prune_region_report(quantize(pc, scale, depth), res.cloud);
  std::cout << "voxelized " << pc.points.size() << " points -> " << res.cloud.coords.size()
            << " voxels (added " << edits.added << ", removed " << edits.removed
            << ", pruned parents " << edits.pruned_parents << ")\n";
  return 0;
}

struct RdCsvRow {
  std::string cloud, chain;
  RDPoint point;
};

std::vector<RdCsvRow> read_rd_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  std::vector<RdCsvRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    RdCsvRow row;
    std::string tok;
    std::getline(ls, row.cloud, ',');
    std::getline(ls, row.chain, ',');
    std::getline(ls, tok, ',');
    row.point.scale = std::stod(tok);
    std::getline(ls, tok, ',');
    row.point.bpp = std::stod(tok);
    std::getline(ls, tok, ',');
    row.point.psnr = std::stod(tok);
    std::getline(ls, tok, ',');
    row.point.d2 = std::stod(tok);
    std::getline(ls, tok, ',');
    row.point.coded_points = size_t(std::stoull(tok));
    rows.push_back(row);
  }
  return rows;
}

RDCurve curve_for(const std::vector<RdCsvRow>& rows, const std::string& cloud,
                  const std::string& chain) {
  std::vector<RDPoint> pts;
  for (const RdCsvRow& r : rows)
    if (r.cloud == cloud && r.chain == chain) pts.push_back(r.point);
  if (pts.empty()) throw ConfigError("no rows for " + cloud + " / " + chain);
  return pareto_front(std::move(pts));
}

int cmd_eval_rd(const Config& cfg) {
  std::string data_dir = cfg.get_str("data.dir", "data");
  std::string out_dir = cfg.get_str("out", "rd_out");
  SweepConfig sweep;
  sweep.scales = cfg.get_doubles("eval.scales", {1.0, 0.5, 0.25, 0.125});
  sweep.depth = cfg.get_int("eval.depth", 8);
  sweep.peak = cfg.get_double("eval.peak", double((1 << sweep.depth) - 1));
  sweep.compute_d2 = cfg.get_bool("eval.d2", true);

  std::vector<std::string> voxnet_paths;
  {
    std::string v = cfg.get_str("voxnet.models", "");
    std::istringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) voxnet_paths.push_back(tok);
  }

  ReportBundle bundle;
  std::vector<std::string> files = sorted_ply_files(data_dir);
  for (const std::string& f : files) {
    std::string name = fs::path(f).stem().string();
    PointCloud original = read_ply(f);
    RDCurve plain = rd_sweep_plain(original, sweep);
    for (const RDPoint& p : plain.samples)
      bundle.rd_points.push_back({name, "quantize+octree", p});

    if (!voxnet_paths.empty()) {
      std::vector<RDPoint> voxnet_points;
      for (const std::string& mp : voxnet_paths) {
        nn::VoxNetModel model = nn::VoxNetModel::from_checkpoint(nn::Checkpoint::load(mp));
        for (double s : sweep.scales)
          voxnet_points.push_back(rd_point_voxnet(original, model, s, sweep));
      }
      RDCurve voxnet_curve = pareto_front(voxnet_points);
      for (const RDPoint& p : voxnet_curve.samples)
        bundle.rd_points.push_back({name, "voxnet+octree", p});
      if (voxnet_curve.samples.size() >= 4) {
        double bd = bd_rate(plain, voxnet_curve);
        bundle.bd_rates.push_back({name, "quantize+octree", "voxnet+octree", bd});
      }
    }
  }
  bundle.notes.push_back("scale grid stands in for undisclosed encoder rate presets");
  write_report(out_dir, bundle);
  std::cout << "report written to " << out_dir << "\n";
  for (const BdRateEntry& e : bundle.bd_rates)
    std::cout << "bd-rate " << e.cloud << ": " << format_double(e.bd_percent) << "%\n";
  return 0;
}

int cmd_bdrate(const std::string& rd_csv, const std::string& ref_chain,
               const std::string& test_chain) {
  std::vector<RdCsvRow> rows = read_rd_csv(rd_csv);
  std::vector<std::string> clouds;
  for (const RdCsvRow& r : rows)
    if (std::find(clouds.begin(), clouds.end(), r.cloud) == clouds.end())
      clouds.push_back(r.cloud);
  std::sort(clouds.begin(), clouds.end());
  double mean = 0;
  int counted = 0;
  for (const std::string& cloud : clouds) {
    try {
      double bd = bd_rate(curve_for(rows, cloud, ref_chain), curve_for(rows, cloud, test_chain));
      std::cout << cloud << " " << format_double(bd) << "%\n";
      mean += bd;
      ++counted;
    } catch (const ConfigError&) {
      // cloud lacks one of the chains
    }
  }
  if (counted == 0) throw ConfigError("no cloud has both chains");
  std::cout << "mean " << format_double(mean / counted) << "%\n";
  return 0;
}

int cmd_flops(const Config& cfg) {
  std::string in = cfg.get_str("in", "");
  if (in.empty()) throw ConfigError("flops needs --in cloud.ply");
  int depth = cfg.get_int("eval.depth", 8);
  double scale = cfg.get_double("eval.scale", 1.0);
  VoxelCloud vc = quantize(read_ply(in), scale, depth);

  std::string model_path = cfg.get_str("voxnet.model", "");
  nn::VoxNetModel model = model_path.empty()
                              ? nn::VoxNetModel(voxnet_config_from(cfg))
                              : nn::VoxNetModel::from_checkpoint(nn::Checkpoint::load(model_path));
  nn::UpsampleFlops f = nn::compare_upsample_flops(model, vc);
  double reduction = double(f.mid_network - f.back_loaded) / double(f.mid_network);
  std::cout << "back_loaded " << f.back_loaded << "\n";
  std::cout << "mid_network " << f.mid_network << "\n";
  std::cout << "reduction " << format_double(100.0 * reduction) << "%\n";
  return 0;
}

int cmd_report(const std::string& rd_csv, const std::string& out_dir,
               const std::string& ref_chain, const std::string& test_chain) {
  std::vector<RdCsvRow> rows = read_rd_csv(rd_csv);
  ReportBundle bundle;
  for (const RdCsvRow& r : rows) bundle.rd_points.push_back({r.cloud, r.chain, r.point});
  std::vector<std::string> clouds;
  for (const RdCsvRow& r : rows)
    if (std::find(clouds.begin(), clouds.end(), r.cloud) == clouds.end())
      clouds.push_back(r.cloud);
  for (const std::string& cloud : clouds) {
    try {
      double bd = bd_rate(curve_for(rows, cloud, ref_chain), curve_for(rows, cloud, test_chain));
      bundle.bd_rates.push_back({cloud, ref_chain, test_chain, bd});
    } catch (const std::exception&) {
    }
  }
  write_report(out_dir, bundle);
  std::cout << "report written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point cloud geometry compression toolkit"};
  app.require_subcommand(1);

  std::string config_path, in, out, codec = "octree", model_path, format = "binary";
  std::string rd_csv, ref_chain = "quantize+octree", test_chain = "voxnet+octree";
  double scale = 1.0;
  int depth = 8;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->allow_extras();
  };

  CLI::App* synth = app.add_subcommand("synth-data", "generate synthetic clouds");
  add_config(synth);
  CLI::App* tsur = app.add_subcommand("train-surrogate", "pretrain the entropy surrogate");
  add_config(tsur);
  CLI::App* tvox = app.add_subcommand("train-voxnet", "jointly train the voxelization network");
  add_config(tvox);

  CLI::App* enc = app.add_subcommand("encode", "losslessly encode a cloud");
  enc->add_option("--in", in, "input .ply")->required();
  enc->add_option("--out", out, "output .pvx")->required();
  enc->add_option("--scale", scale, "quantization scale");
  enc->add_option("--depth", depth, "bit depth");
  enc->add_option("--codec", codec, "octree|surrogate");
  enc->add_option("--model", model_path, "surrogate checkpoint");

  CLI::App* dec = app.add_subcommand("decode", "decode a .pvx stream");
  dec->add_option("--in", in, "input .pvx")->required();
  dec->add_option("--out", out, "output .ply")->required();
  dec->add_option("--model", model_path, "surrogate checkpoint");
  dec->add_option("--format", format, "ascii|binary");

  CLI::App* vox = app.add_subcommand("voxelize", "run the learned preprocessor");
  vox->add_option("--model", model_path, "voxnet checkpoint")->required();
  vox->add_option("--in", in, "input .ply")->required();
  vox->add_option("--out", out, "output .ply")->required();
  vox->add_option("--scale", scale, "quantization scale");
  vox->add_option("--depth", depth, "bit depth");

  CLI::App* eval = app.add_subcommand("eval-rd", "rate-distortion sweep and report");
  add_config(eval);

  CLI::App* bdr = app.add_subcommand("bdrate", "BD-rate between two chains of an rd csv");
  bdr->add_option("--rd", rd_csv, "rd_points.csv")->required();
  bdr->add_option("--ref", ref_chain, "reference chain");
  bdr->add_option("--test", test_chain, "test chain");

  CLI::App* flops = app.add_subcommand("flops", "upsampling FLOPs comparison");
  add_config(flops);

  CLI::App* rep = app.add_subcommand("report", "regenerate report files from an rd csv");
  rep->add_option("--rd", rd_csv, "rd_points.csv")->required();
  rep->add_option("--out", out, "output directory")->required();
  rep->add_option("--ref", ref_chain, "reference chain");
  rep->add_option("--test", test_chain, "test chain");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth_data(make_config(config_path, synth->remaining()));
    if (tsur->parsed()) return cmd_train_surrogate(make_config(config_path, tsur->remaining()));
    if (tvox->parsed()) return cmd_train_voxnet(make_config(config_path, tvox->remaining()));
    if (enc->parsed()) return cmd_encode(in, out, scale, depth, codec, model_path);
    if (dec->parsed()) return cmd_decode(in, out, model_path, format);
    if (vox->parsed()) return cmd_voxelize(model_path, in, out, scale, depth);
    if (eval->parsed()) return cmd_eval_rd(make_config(config_path, eval->remaining()));
    if (bdr->parsed()) return cmd_bdrate(rd_csv, ref_chain, test_chain);
    if (flops->parsed()) return cmd_flops(make_config(config_path, flops->remaining()));
    if (rep->parsed()) return cmd_report(rd_csv, out, ref_chain, test_chain);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
