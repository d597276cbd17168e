#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cropmon/baselines.hpp"
#include "cropmon/classifier.hpp"
#include "cropmon/digest.hpp"
#include "cropmon/domain_adaptation.hpp"
#include "cropmon/errors.hpp"
#include "cropmon/evaluation.hpp"
#include "cropmon/phenology.hpp"
#include "cropmon/pipeline.hpp"
#include "cropmon/temporal.hpp"

namespace cropmon::cli {

namespace fs = std::filesystem;

namespace {

json train_defaults() {
  const TrainConfig t;
  return {{"pooling", to_string(t.pooling)}, {"hidden_dim", t.hidden_dim},       {"epochs", t.epochs},
          {"batch_size", t.batch_size},      {"learning_rate", t.learning_rate}, {"standardize", t.standardize},
          {"scale_floor", t.scale_floor}};
}

json da_defaults() {
  const DaConfig d;
  return {{"lambda_att", d.lambda_att},
          {"disc_steps", d.disc_steps},
          {"iterations", d.iterations},
          {"da_batch_size", d.batch_size},
          {"mapper_learning_rate", d.mapper_learning_rate},
          {"disc_learning_rate", d.disc_learning_rate},
          {"learn_offset", d.learn_offset},
          {"mapper_decay", d.mapper_decay},
          {"tail_average", d.tail_average},
          {"mapper_hidden", d.mapper_hidden},
          {"disc_hidden", d.disc_hidden}};
}

json merged(json a, const json& b) {
  for (const auto& [k, v] : b.items()) a[k] = v;
  return a;
}

TrainConfig train_config(const json& c, std::uint64_t seed) {
  TrainConfig t;
  t.pooling = pooling_from_string(c.at("pooling").get<std::string>());
  t.hidden_dim = c.at("hidden_dim").get<std::size_t>();
  t.epochs = c.at("epochs").get<std::size_t>();
  t.batch_size = c.at("batch_size").get<std::size_t>();
  t.learning_rate = c.at("learning_rate").get<double>();
  t.standardize = c.at("standardize").get<bool>();
  t.scale_floor = c.at("scale_floor").get<double>();
  t.seed = seed;
  return t;
}

DaConfig da_config(const json& c, std::uint64_t seed) {
  DaConfig d;
  d.lambda_att = c.at("lambda_att").get<double>();
  d.disc_steps = c.at("disc_steps").get<std::size_t>();
  d.iterations = c.at("iterations").get<std::size_t>();
  d.batch_size = c.at("da_batch_size").get<std::size_t>();
  d.mapper_learning_rate = c.at("mapper_learning_rate").get<double>();
  d.disc_learning_rate = c.at("disc_learning_rate").get<double>();
  d.learn_offset = c.at("learn_offset").get<bool>();
  d.mapper_decay = c.at("mapper_decay").get<double>();
  d.tail_average = c.at("tail_average").get<bool>();
  d.mapper_hidden = c.at("mapper_hidden").get<std::size_t>();
  d.disc_hidden = c.at("disc_hidden").get<std::size_t>();
  d.seed = seed;
  return d;
}

bool same_kind(const json& def, const json& v) {
  if (def.is_null()) return v.is_null() || v.is_string();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_unsigned()) return v.is_number_unsigned();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) {
    if (!v.is_array()) return false;
    if (def.empty()) return true;
    for (const auto& e : v) {
      if (!same_kind(def.front(), e)) return false;
    }
    return true;
  }
  return false;
}

std::string kind_name(const json& def) {
  if (def.is_null()) return "path";
  if (def.is_boolean()) return "boolean";
  if (def.is_number_unsigned()) return "nonnegative integer";
  if (def.is_number_integer()) return "integer";
  if (def.is_number()) return "number";
  if (def.is_string()) return "string";
  return "list";
}

json parse_scalar(const json& def, const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    if (def.is_boolean()) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw std::invalid_argument(text);
    }
    if (def.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
      const unsigned long long v = std::stoull(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    }
    if (def.is_number_integer()) {
      const long long v = std::stoll(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    }
    if (def.is_number_float()) {
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    }
    return text;
  } catch (const std::logic_error&) {
    throw ValidationError("--" + key + ": '" + text + "' is not a valid " + kind_name(def));
  }
}

json parse_flag(const json& def, const std::string& key, const std::string& text) {
  if (!def.is_array()) return parse_scalar(def, key, text);
  const json element = def.empty() ? json("") : def.front();
  json out = json::array();
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(parse_scalar(element, key, item));
  }
  return out;
}

std::string flag_name(const std::string& key) {
  std::string s = key;
  for (char& ch : s) {
    if (ch == '_') ch = '-';
  }
  return s;
}

std::string require_path(const json& c, const std::string& key) {
  if (!c.contains(key) || c.at(key).is_null() || c.at(key).get<std::string>().empty()) {
    throw ValidationError("missing required input '" + key + "' (flag --" + flag_name(key) + ")");
  }
  return c.at(key).get<std::string>();
}

// Collects outputs and input digests for the run manifest.
class Run {
 public:
  Run(std::string command, json config, fs::path out, std::uint64_t seed)
      : command_(std::move(command)), config_(std::move(config)), out_(std::move(out)), seed_(seed) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw IoError("cannot create output directory '" + out_.string() + "': " + ec.message());
  }

  void input(const std::string& role, const std::string& path, const std::string& digest) {
    inputs_[role] = {{"path", path}, {"digest", digest}};
  }
  void write(const std::string& name, const std::string& content) {
    write_file_atomic(out_ / name, content);
    outputs_[name] = fnv1a_hex(content);
  }
  void summary(const std::string& key, json value) { summary_[key] = std::move(value); }
  const fs::path& out() const { return out_; }
  std::uint64_t seed() const { return seed_; }
  const json& config() const { return config_; }

  void finish() {
    json m;
    m["command"] = command_;
    m["seed"] = seed_;
    m["config"] = config_;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    if (!summary_.empty()) m["summary"] = summary_;
    write_file_atomic(out_ / ("manifest_" + command_ + ".json"), m.dump(2) + "\n");
  }

 private:
  std::string command_;
  json config_;
  fs::path out_;
  std::uint64_t seed_;
  json inputs_ = json::object();
  json outputs_ = json::object();
  json summary_ = json::object();
};

Dataset load_input(Run& run, const json& c, const std::string& key, const LoadOptions& options = {}) {
  const std::string path = require_path(c, key);
  Dataset d = load_dataset(path, options);
  run.input(key, path, d.digest());
  return d;
}

ModelBundle load_model_input(Run& run, const json& c, const std::string& key = "model") {
  const std::string path = require_path(c, key);
  ModelBundle m = load_model(path);
  run.input(key, path, m.digest());
  return m;
}

LoadOptions options_for(const ModelBundle& m) {
  LoadOptions o;
  o.class_names = m.class_names;
  return o;
}

void check_model_data(const ModelBundle& m, const Dataset& d, const std::string& what) {
  if (d.class_names() != m.class_names) throw ValidationError(what + " classes differ from the model's classes");
  if (d.feature_dim() != m.input_dim()) {
    throw DimensionError(what + " has " + std::to_string(d.feature_dim()) + " features per step, model expects " +
                         std::to_string(m.input_dim()));
  }
}

std::string scenario_name(int shift) { return "shift" + std::to_string(shift); }

void cmd_generate(Run& run) {
  const json& c = run.config();
  const auto classes = c.at("classes").get<std::vector<std::string>>();
  const auto shifts = c.at("shifts").get<std::vector<int>>();
  const std::size_t count = c.at("count").get<std::size_t>();
  if (classes.empty()) throw ValidationError("generate needs at least one class");
  if (shifts.empty()) throw ValidationError("generate needs at least one shift");
  const TemplateSet templates = default_templates();
  std::vector<ClassCount> mix;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (!templates.count(classes[k])) throw ValidationError("unknown class template '" + classes[k] + "'");
    mix.push_back({classes[k], count / classes.size() + (k < count % classes.size() ? 1 : 0)});
  }
  const std::string prefix = c.at("prefix").get<std::string>();
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    SeasonScenario sc;
    sc.name = scenario_name(shifts[i]);
    sc.planting_shift_days = shifts[i];
    sc.noise_sigma = c.at("noise_sigma").get<double>();
    sc.cloud_drop_prob = c.at("cloud_drop_prob").get<double>();
    sc.validate();
    const Dataset d = Dataset::from_labeled(synth_dataset(mix, templates, sc, mix_seed(run.seed(), i)), classes);
    const std::string name = prefix + sc.name + ".csv";
    run.write(name, d.to_csv());
    std::cout << name << ": " << d.size() << " pixels, digest " << d.digest() << "\n";
  }
}

void cmd_train(Run& run) {
  const json& c = run.config();
  const Dataset data = load_input(run, c, "data");
  const ModelBundle model = train(data, train_config(c, run.seed()));
  run.write(c.at("model_name").get<std::string>(), model_to_json(model));
  std::string losses = "epoch,loss\n";
  for (std::size_t e = 0; e < model.loss_history.size(); ++e) {
    losses += std::to_string(e) + "," + format_double(model.loss_history[e]) + "\n";
  }
  run.write("loss.csv", losses);
  const Scores fit = score_probabilities(predict_batch(model, data), data.labels());
  run.summary("model_digest", model.digest());
  run.summary("train_auc", fit.auc);
  run.summary("train_f1", fit.f1);
  std::cout << "model " << model.digest() << " trained on " << data.size() << " pixels; train AUC "
            << format_double(fit.auc) << "\n";
  if (model.pooling == Pooling::attention) {
    const AttentionProfile mean = mean_attention(model, data);
    std::string csv = "step,weight\n";
    for (std::size_t t = 0; t < mean.length(); ++t) {
      csv += std::to_string(t + 1) + "," + format_double(mean.weights[t]) + "\n";
    }
    run.write("attention.csv", csv);
    const auto periods = above_uniform_intervals(mean);
    if (!periods.empty()) {
      run.summary("top_period", {{"first_step", periods[0].first + 1}, {"last_step", periods[0].last + 1}});
      std::cout << "top attention period: steps " << periods[0].first + 1 << "-" << periods[0].last + 1 << "\n";
    }
  }
}

void cmd_adapt(Run& run) {
  const json& c = run.config();
  const ModelBundle model = load_model_input(run, c);
  const Dataset source = load_input(run, c, "source", options_for(model));
  if (model.train_digest != source.digest()) {
    throw ValidationError("model was trained on dataset " + model.train_digest + " but source dataset is " +
                          source.digest() + "; refusing to adapt across lineages");
  }
  const Dataset target = load_input(run, c, "target", options_for(model));
  check_model_data(model, target, "target dataset");
  const AdaptedBundle adapted = train_da(source, target, model, da_config(c, run.seed()));
  run.write(c.at("adapted_name").get<std::string>(), adapted_to_json(adapted));
  std::string curves = "iteration,disc_loss,adapt_loss,consistency\n";
  for (std::size_t i = 0; i < adapted.disc_loss_history.size(); ++i) {
    curves += std::to_string(i) + "," + format_double(adapted.disc_loss_history[i]) + "," +
              format_double(adapted.adapt_loss_history[i]) + "," + format_double(adapted.consistency_history[i]) +
              "\n";
  }
  run.write("adapt_curves.csv", curves);
  run.summary("adapted_digest", adapted.digest());

  // Labels of the evaluation set are read only after training, for reporting.
  const json& eval_path = c.at("eval");
  const Dataset eval = eval_path.is_null() ? target : load_input(run, c, "eval", options_for(model));
  check_model_data(model, eval, "evaluation dataset");
  const Scores before = score_probabilities(predict_batch(model, eval), eval.labels());
  const Scores after = score_probabilities(predict_adapted_batch(model, adapted, eval), eval.labels());
  run.summary("unadapted_auc", before.auc);
  run.summary("adapted_auc", after.auc);
  std::cout << "target AUC unadapted " << format_double(before.auc) << ", adapted " << format_double(after.auc)
            << "\n";
}

void cmd_evaluate(Run& run) {
  const json& c = run.config();
  std::optional<ModelBundle> model;
  LoadOptions opts;
  if (!c.at("model").is_null()) {
    model = load_model_input(run, c);
    opts = options_for(*model);
  }
  const Dataset train_set = load_input(run, c, "train", opts);
  if (!model) opts.class_names = train_set.class_names();
  const auto paths = c.at("test").get<std::vector<std::string>>();
  if (paths.empty()) throw ValidationError("evaluate needs at least one --test dataset");
  std::vector<Scenario> scenarios;
  for (const std::string& p : paths) {
    Dataset d = load_dataset(p, opts);
    const std::string name = fs::path(p).stem().string();
    for (const auto& s : scenarios) {
      if (s.first == name) throw ValidationError("two test datasets share the scenario name '" + name + "'");
    }
    run.input("test:" + name, p, d.digest());
    scenarios.emplace_back(name, std::move(d));
  }
  std::vector<Method> methods;
  for (const auto& m : c.at("methods").get<std::vector<std::string>>()) methods.push_back(method_from_string(m));
  CompareConfig cc;
  cc.train = train_config(c, run.seed());
  cc.da = da_config(c, run.seed());
  cc.positive_class = c.at("positive_class").get<std::size_t>();
  if (model) cc.pretrained = &*model;
  const EvalReport report = compare_methods(train_set, scenarios, methods, run.seed(), cc);
  run.write("report.csv", report.to_csv());
  run.write("report.txt", report.to_table());
  std::cout << report.to_table();
}

void cmd_early(Run& run) {
  const json& c = run.config();
  const ModelBundle model = load_model_input(run, c);
  const Dataset data = load_input(run, c, "data", options_for(model));
  check_model_data(model, data, "dataset");
  const double threshold = c.at("threshold").get<double>();
  const std::size_t patience = c.at("patience").get<std::size_t>();

  std::vector<ConfidenceCurve> curves(data.size());
  for_each_index(data.size(), Execution::parallel,
                 [&](std::size_t i) { curves[i] = confidence_progression(model, data[i].windowed); });
  std::vector<CohortCurve> cohorts;
  std::string table = "class,pixels,mean_earliest_step,undetected\n";
  json summary = json::object();
  for (std::size_t cls = 0; cls < data.num_classes(); ++cls) {
    std::vector<ConfidenceCurve> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].label == cls) members.push_back(curves[i]);
    }
    if (members.empty()) continue;
    cohorts.push_back(cohort_statistics(members, cls));
    std::size_t undetected = 0;
    for (const auto& m : members) undetected += !earliest_detection(m, cls, threshold, patience).has_value();
    const double mean_step = mean_earliest_detection(members, cls, threshold, patience);
    const std::string& name = data.class_names()[cls];
    table += name + "," + std::to_string(members.size()) + "," + format_double(mean_step) + "," +
             std::to_string(undetected) + "\n";
    summary[name] = mean_step;
    std::cout << name << ": mean earliest detection step " << format_double(mean_step) << " (" << undetected
              << " of " << members.size() << " undetected)\n";
  }
  run.write("confidence.csv", confidence_csv(cohorts, data.class_names()));
  run.write("confidence.svg", confidence_svg(cohorts, data.class_names()));
  run.write("earliest.csv", table);
  run.summary("mean_earliest_step", summary);
}

void cmd_covercrops(Run& run) {
  const json& c = run.config();
  const Dataset data = load_input(run, c, "data");
  CoverCropRule rule;
  rule.harvest_step = c.at("harvest_step").get<std::size_t>();
  rule.post_window = c.at("post_window").get<std::size_t>();
  rule.green_threshold = c.at("green_threshold").get<double>();
  rule.evergreen_min = c.at("evergreen_min").get<double>();
  rule.season_first = c.at("season_first").get<std::size_t>();
  rule.season_last = c.at("season_last").get<std::size_t>();
  rule.require_dip = c.at("require_dip").get<bool>();
  rule.median_filter = c.at("median_filter").get<bool>();
  rule.validate(data.raw_composites());
  const double area = c.at("pixel_area").get<double>();
  if (!(area > 0.0)) throw ValidationError("pixel_area must be positive");
  const bool by_base = c.at("group_by_base").get<bool>();

  const TemplateSet templates = default_templates();
  std::vector<CoverClass> detections(data.size());
  for_each_index(data.size(), Execution::parallel,
                 [&](std::size_t i) { detections[i] = detect_cover_crop(ndvi_series(data[i].raw), rule); });
  std::vector<std::string> groups;
  std::string csv = "pixel_id,class,detection\n";
  // Truth is known when the class name is a built-in template.
  std::size_t tp = 0, fp = 0, fn = 0, known = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string& cls = data.class_names()[data[i].label];
    const auto it = templates.find(cls);
    groups.push_back(by_base && it != templates.end() ? it->second.base_class : cls);
    csv += data[i].id + "," + cls + "," + to_string(detections[i]) + "\n";
    if (it != templates.end()) {
      ++known;
      const bool truth = it->second.post_harvest_green && !it->second.evergreen;
      const bool said = detections[i] == CoverClass::cover_cropped;
      tp += truth && said;
      fp += !truth && said;
      fn += truth && !said;
    }
  }
  const std::vector<double> areas(data.size(), area);
  const CoverTable table = cover_crop_table(groups, detections, areas);
  run.write("detections.csv", csv);
  run.write("cover_table.csv", table.to_csv());
  std::cout << table.to_text();
  if (known > 0) {
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    run.summary("precision", precision);
    run.summary("recall", recall);
    std::cout << "cover-crop precision " << format_double(precision) << ", recall " << format_double(recall)
              << " against " << known << " template-labelled pixels\n";
  }
}

struct Command {
  std::string description;
  std::function<json()> defaults;
  std::function<void(Run&)> body;
};

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table = {
      {"generate",
       {"Write synthetic scenario datasets (one CSV per planting shift)",
        [] {
          return json{{"classes", {"corn", "soybean"}},
                      {"count", std::size_t{1000}},
                      {"shifts", {0, 8, 16}},
                      {"noise_sigma", 0.02},
                      {"cloud_drop_prob", 0.03},
                      {"prefix", ""}};
        },
        cmd_generate}},
      {"train",
       {"Train an LSTM classifier",
        [] { return merged(json{{"data", nullptr}, {"model_name", "model.json"}}, train_defaults()); }, cmd_train}},
      {"adapt",
       {"Adapt a trained attention model to a shifted target dataset",
        [] {
          return merged(json{{"model", nullptr},
                             {"source", nullptr},
                             {"target", nullptr},
                             {"eval", nullptr},
                             {"adapted_name", "adapted.json"}},
                        da_defaults());
        },
        cmd_adapt}},
      {"evaluate",
       {"Compare methods across test scenarios",
        [] {
          json j{{"train", nullptr},
                 {"test", json::array()},
                 {"model", nullptr},
                 {"methods", {"ann", "knn_dtw", "lstm", "lstm_att", "da"}},
                 {"positive_class", std::size_t{0}}};
          return merged(merged(j, train_defaults()), da_defaults());
        },
        cmd_evaluate}},
      {"early",
       {"Confidence progression and earliest detection per class",
        [] { return json{{"model", nullptr}, {"data", nullptr}, {"threshold", 0.8}, {"patience", std::size_t{2}}}; }, cmd_early}},
      {"covercrops",
       {"Rule-based cover-crop detection and area table",
        [] {
          const CoverCropRule r;
          return json{{"data", nullptr},
                      {"harvest_step", r.harvest_step},
                      {"post_window", r.post_window},
                      {"green_threshold", r.green_threshold},
                      {"evergreen_min", r.evergreen_min},
                      {"season_first", r.season_first},
                      {"season_last", r.season_last},
                      {"require_dip", r.require_dip},
                      {"median_filter", r.median_filter},
                      {"pixel_area", 1.0},
                      {"group_by_base", true}};
        },
        cmd_covercrops}},
  };
  return table;
}

const Command& find_command(const std::string& name) {
  const auto it = commands().find(name);
  if (it == commands().end()) throw ValidationError("unknown command '" + name + "'");
  return it->second;
}

}  // namespace

json command_defaults(const std::string& command) { return find_command(command).defaults(); }

std::vector<std::string> command_names() {
  std::vector<std::string> out;
  for (const auto& [name, cmd] : commands()) out.push_back(name);
  return out;
}

json resolve_config(const std::string& command, const json& file,
                    const std::vector<std::pair<std::string, std::string>>& flags) {
  json c = command_defaults(command);
  c["seed"] = std::uint64_t{1};
  c["out"] = ".";
  if (!file.is_null()) {
    if (!file.is_object()) throw ValidationError("config file must hold a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (!c.contains(key)) throw ValidationError("unknown config key '" + key + "' for command " + command);
      if (!same_kind(c[key], value)) {
        throw ValidationError("config key '" + key + "' should be a " + kind_name(c[key]));
      }
      c[key] = value;
    }
  }
  for (const auto& [key, text] : flags) {
    if (!c.contains(key)) throw ValidationError("unknown option --" + flag_name(key));
    c[key] = parse_flag(c[key], key, text);
  }
  return c;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Crop classification experiments on synthetic satellite time series", "cropmon"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::string> seed_flag, out_flag;
  app.add_option("--config", config_path, "JSON file of command parameters");
  app.add_option("--seed", seed_flag, "Random seed (u64)");
  app.add_option("--out", out_flag, "Output directory");

  std::map<std::string, std::map<std::string, std::optional<std::string>>> values;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, cmd] : commands()) {
    CLI::App* sub = app.add_subcommand(name, cmd.description);
    sub->fallthrough();
    subs[name] = sub;
    auto& slot = values[name];
    const json defaults = cmd.defaults();
    for (const auto& [key, def] : defaults.items()) {
      const std::string shown = def.is_null() ? std::string("none") : (def.is_string() ? def.get<std::string>() : def.dump());
      sub->add_option("--" + flag_name(key), slot[key], kind_name(def) + " (default " + shown + ")");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const auto started = std::chrono::steady_clock::now();
  std::string name;
  for (const auto& [n, sub] : subs) {
    if (sub->parsed()) name = n;
  }
  try {
    json file;
    if (!config_path.empty()) {
      try {
        file = json::parse(read_file(config_path));
      } catch (const json::parse_error& e) {
        throw ValidationError("config '" + config_path + "' is not valid JSON: " + e.what());
      }
    }
    std::vector<std::pair<std::string, std::string>> flags;
    for (const auto& [key, v] : values[name]) {
      if (v) flags.emplace_back(key, *v);
    }
    if (seed_flag) flags.emplace_back("seed", *seed_flag);
    if (out_flag) flags.emplace_back("out", *out_flag);
    json config = resolve_config(name, file, flags);
    const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
    const fs::path out = config.at("out").get<std::string>();
    std::cerr << "cropmon " << name << " config: " << config.dump() << "\n";

    Run run_state(name, config, out, seed);
    find_command(name).body(run_state);
    run_state.finish();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", seconds);
    std::cerr << "cropmon " << name << ": done in " << buf << " s\n";
    return kExitOk;
  } catch (const IoError& e) {
    std::cerr << "cropmon " << name << ": I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "cropmon " << name << ": I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "cropmon " << name << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const StateError& e) {
    std::cerr << "cropmon " << name << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "cropmon " << name << ": bad value: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace cropmon::cli
