#include "relay/io.hpp"

#include <cstring>

#include <nlohmann/json.hpp>

namespace relay {

using json = nlohmann::ordered_json;

namespace {

constexpr int kTrajectoryVersion = 1;
constexpr int kDatasetVersion = 1;
constexpr int kPolicyVersion = 1;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw MissingArtifactError("missing artifact: " + path.string());
  return in;
}

json parse_line(const std::string& line, const std::filesystem::path& path,
                std::size_t line_no) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded())
    throw FormatError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed JSON record");
  return j;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, int expect_cols = -1) {
  const auto nr = static_cast<Eigen::Index>(rows.size());
  Eigen::Index nc = expect_cols;
  if (nr > 0) nc = static_cast<Eigen::Index>(rows.front().size());
  if (nc < 0) nc = 0;
  Eigen::MatrixXd m(nr, nc);
  for (Eigen::Index r = 0; r < nr; ++r) {
    const json& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != nc)
      throw FormatError("ragged matrix rows in record");
    for (Eigen::Index c = 0; c < nc; ++c)
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = arr[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

void write_trajectories(const std::filesystem::path& path,
                        const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open for writing: " + path.string());
  json header{{"format", "relay-trajectories"},
              {"version", kTrajectoryVersion},
              {"count", trajectories.size()}};
  if (!trajectories.empty()) {
    header["state_dim"] = trajectories.front().state_dim();
    header["action_dim"] = trajectories.front().action_dim();
  }
  out << header.dump() << '\n';
  for (const Trajectory& tr : trajectories) {
    json rec{{"seed", tr.seed},
             {"demo", tr.is_demo},
             {"truncated", tr.truncated},
             {"states", matrix_to_json(tr.states)},
             {"actions", matrix_to_json(tr.actions)}};
    if (tr.subgoals.rows() > 0) rec["subgoals"] = matrix_to_json(tr.subgoals);
    if (!tr.block_starts.empty()) rec["block_starts"] = tr.block_starts;
    if (tr.low_rewards.size() > 0)
      rec["low_rewards"] = vector_to_json(tr.low_rewards);
    if (tr.high_rewards.size() > 0)
      rec["high_rewards"] = vector_to_json(tr.high_rewards);
    out << rec.dump() << '\n';
  }
}

std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line))
    throw FormatError(path.string() + ": empty trajectory file");
  const json header = parse_line(line, path, 1);
  if (header.value("format", "") != "relay-trajectories")
    throw FormatError(path.string() + ": not a trajectory file");
  if (header.value("version", 0) != kTrajectoryVersion)
    throw FormatError(path.string() + ": unsupported trajectory version");

  std::vector<Trajectory> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json rec = parse_line(line, path, line_no);
    Trajectory tr;
    tr.seed = rec.value("seed", std::uint64_t{0});
    tr.is_demo = rec.value("demo", false);
    tr.truncated = rec.value("truncated", false);
    tr.states = matrix_from_json(rec.at("states"));
    tr.actions = matrix_from_json(rec.at("actions"));
    if (rec.contains("subgoals"))
      tr.subgoals = matrix_from_json(rec["subgoals"]);
    if (rec.contains("block_starts"))
      tr.block_starts = rec["block_starts"].get<std::vector<int>>();
    if (rec.contains("low_rewards"))
      tr.low_rewards = vector_from_json(rec["low_rewards"]);
    if (rec.contains("high_rewards"))
      tr.high_rewards = vector_from_json(rec["high_rewards"]);
    if (!tr.consistent())
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": states/actions length mismatch");
    out.push_back(std::move(tr));
  }
  const std::size_t expected = header.value("count", out.size());
  if (expected != out.size())
    throw FormatError(path.string() + ": header count " +
                      std::to_string(expected) + " != records " +
                      std::to_string(out.size()));
  return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open for writing: " + path.string());
  json header{{"format", "relay-goal-tuples"},
              {"version", kDatasetVersion},
              {"level", data.level() == Level::kLow ? "low" : "high"},
              {"state_dim", data.state_dim()},
              {"action_dim", data.action_dim()},
              {"count", data.size()}};
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const GoalTuple tuple = data.get(i);
    json rec{{"s", vector_to_json(tuple.state)},
             {"g", vector_to_json(tuple.goal)},
             {"a", vector_to_json(tuple.action)},
             {"traj", tuple.origin.trajectory},
             {"t", tuple.origin.t},
             {"w", tuple.origin.w}};
    out << rec.dump() << '\n';
  }
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line))
    throw FormatError(path.string() + ": empty dataset file");
  const json header = parse_line(line, path, 1);
  if (header.value("format", "") != "relay-goal-tuples")
    throw FormatError(path.string() + ": not a goal-tuple file");
  if (header.value("version", 0) != kDatasetVersion)
    throw FormatError(path.string() + ": unsupported dataset version");
  const Level level =
      header.value("level", "low") == std::string("high") ? Level::kHigh
                                                          : Level::kLow;
  const int ds = header.at("state_dim").get<int>();
  const int da = header.at("action_dim").get<int>();
  const std::size_t count = header.at("count").get<std::size_t>();

  Eigen::MatrixXd states(count, ds), goals(count, ds), actions(count, da);
  std::vector<Provenance> origin(count);
  std::size_t i = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (i >= count)
      throw FormatError(path.string() + ": more records than header count");
    const json rec = parse_line(line, path, line_no);
    states.row(static_cast<Eigen::Index>(i)) =
        vector_from_json(rec.at("s")).transpose();
    goals.row(static_cast<Eigen::Index>(i)) =
        vector_from_json(rec.at("g")).transpose();
    actions.row(static_cast<Eigen::Index>(i)) =
        vector_from_json(rec.at("a")).transpose();
    origin[i] = Provenance{rec.at("traj").get<std::size_t>(),
                           rec.at("t").get<int>(), rec.at("w").get<int>()};
    ++i;
  }
  if (i != count)
    throw FormatError(path.string() + ": header count " +
                      std::to_string(count) + " != records " +
                      std::to_string(i));
  Dataset data(level, ds, da);
  data.append_columns(std::move(states), std::move(goals), std::move(actions),
                      std::move(origin));
  return data;
}

void write_policy(const std::filesystem::path& stem,
                  const GaussianPolicy& policy) {
  const std::filesystem::path manifest_path =
      std::filesystem::path(stem).concat(".json");
  const std::filesystem::path bin_path =
      std::filesystem::path(stem).concat(".bin");

  json tensors = json::array();
  std::size_t offset = 0;
  auto add_tensor = [&](const std::string& name, int rows, int cols) {
    tensors.push_back(json{{"name", name},
                           {"rows", rows},
                           {"cols", cols},
                           {"offset", offset}});
    offset += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  };
  const MlpShape& shape = policy.shape();
  for (int l = 0; l < shape.num_layers(); ++l) {
    const auto [out, in] = shape.layer_dims(l);
    add_tensor("weight" + std::to_string(l), out, in);
    add_tensor("bias" + std::to_string(l), out, 1);
  }
  add_tensor("log_std", shape.output_dim, 1);
  add_tensor("input_mean", shape.input_dim, 1);
  add_tensor("input_std", shape.input_dim, 1);

  json manifest{{"format", "relay-policy"},
                {"version", kPolicyVersion},
                {"input_dim", shape.input_dim},
                {"output_dim", shape.output_dim},
                {"hidden", shape.hidden},
                {"total_doubles", offset},
                {"tensors", tensors}};
  std::ofstream mout(manifest_path);
  if (!mout)
    throw std::runtime_error("cannot open for writing: " +
                             manifest_path.string());
  mout << manifest.dump(2) << '\n';

  std::ofstream bout(bin_path, std::ios::binary);
  if (!bout)
    throw std::runtime_error("cannot open for writing: " + bin_path.string());
  auto write_doubles = [&](const double* data, std::size_t n) {
    bout.write(reinterpret_cast<const char*>(data),
               static_cast<std::streamsize>(n * sizeof(double)));
  };
  write_doubles(policy.params().data(),
                static_cast<std::size_t>(policy.params().size()));
  write_doubles(policy.input_mean().data(),
                static_cast<std::size_t>(policy.input_mean().size()));
  write_doubles(policy.input_std().data(),
                static_cast<std::size_t>(policy.input_std().size()));
}

GaussianPolicy read_policy(const std::filesystem::path& stem) {
  const std::filesystem::path manifest_path =
      std::filesystem::path(stem).concat(".json");
  const std::filesystem::path bin_path =
      std::filesystem::path(stem).concat(".bin");
  std::ifstream min = open_input(manifest_path);
  json manifest;
  try {
    min >> manifest;
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "relay-policy")
    throw FormatError(manifest_path.string() + ": not a policy manifest");
  if (manifest.value("version", 0) != kPolicyVersion)
    throw FormatError(manifest_path.string() + ": unsupported policy version");

  MlpShape shape;
  shape.input_dim = manifest.at("input_dim").get<int>();
  shape.output_dim = manifest.at("output_dim").get<int>();
  shape.hidden = manifest.at("hidden").get<std::vector<int>>();
  GaussianPolicy policy{shape};

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin)
    throw MissingArtifactError("missing artifact: " + bin_path.string());
  const std::size_t total = manifest.at("total_doubles").get<std::size_t>();
  const std::size_t expected =
      static_cast<std::size_t>(policy.param_count()) +
      2 * static_cast<std::size_t>(shape.input_dim);
  if (total != expected)
    throw FormatError(bin_path.string() + ": tensor size mismatch");
  std::vector<double> buffer(total);
  bin.read(reinterpret_cast<char*>(buffer.data()),
           static_cast<std::streamsize>(total * sizeof(double)));
  if (static_cast<std::size_t>(bin.gcount()) != total * sizeof(double))
    throw FormatError(bin_path.string() + ": truncated tensor file");

  std::memcpy(policy.params().data(), buffer.data(),
              static_cast<std::size_t>(policy.param_count()) * sizeof(double));
  Eigen::VectorXd mean(shape.input_dim), std(shape.input_dim);
  std::memcpy(mean.data(), buffer.data() + policy.param_count(),
              static_cast<std::size_t>(shape.input_dim) * sizeof(double));
  std::memcpy(std.data(),
              buffer.data() + policy.param_count() + shape.input_dim,
              static_cast<std::size_t>(shape.input_dim) * sizeof(double));
  policy.set_standardization(std::move(mean), std::move(std));
  return policy;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_)
    throw std::runtime_error("cannot open for writing: " + path.string());
  out_ << json{{"format", "relay-metrics"}, {"version", 1}}.dump() << '\n';
}

void MetricsWriter::record(const std::string& json_line) {
  out_ << json_line << '\n';
}

void MetricsWriter::flush() { out_.flush(); }

std::vector<std::string> read_metric_lines(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  if (!std::getline(in, line))
    throw FormatError(path.string() + ": empty metrics file");
  const json header = parse_line(line, path, 1);
  if (header.value("format", "") != "relay-metrics")
    throw FormatError(path.string() + ": not a metrics file");
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace relay
