#include "reccas/model_io.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "reccas/errors.hpp"

namespace reccas {
namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

}  // namespace

void save_model(const std::string& path, const Model& model,
                const ModelFileInfo& info) {
  if (model.direct_tables) {
    throw std::invalid_argument("fixture models are not serializable");
  }
  json j;
  j["schema_version"] = kSchemaVersion;
  j["family"] = family_name(model.family);
  j["n_nodes"] = model.n;
  j["d"] = model.d;
  if (model.family == Family::kRecurrent) j["cell"] = cell_name(model.cell);
  j["epoch"] = model.epoch;
  j["normalization"] = info.normalization;
  j["init"] = info.init;
  j["train_config"] = info.train_config;
  json groups = json::object();
  for (std::size_t g = 0; g < model.params.group_count(); ++g) {
    const auto& grp = model.params.group(static_cast<int>(g));
    groups[grp.name] = {
        {"rows", grp.rows}, {"cols", grp.cols}, {"data", grp.data}};
  }
  j["groups"] = std::move(groups);

  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << j.dump() << "\n";
  if (!f) throw DataError("failed writing " + path);
}

Model load_model(const std::string& path, ModelFileInfo* info) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw DataError(path + ": unsupported schema version");
    }
    const Family family = family_from_name(j.at("family").get<std::string>());
    const int n = j.at("n_nodes").get<int>();
    const int d = j.value("d", 0);
    Model model;
    switch (family) {
      case Family::kClassic:
        model = Model::classic(n, 0);
        break;
      case Family::kEmbedded:
        model = Model::embedded(n, d, 0);
        break;
      case Family::kRecurrent:
        model = Model::recurrent(
            n, d, cell_from_name(j.at("cell").get<std::string>()), 0);
        break;
    }
    model.epoch = j.value("epoch", 0);
    const json& groups = j.at("groups");
    if (groups.size() != model.params.group_count()) {
      throw DataError(path + ": unexpected parameter group count");
    }
    for (std::size_t g = 0; g < model.params.group_count(); ++g) {
      auto& grp = model.params.group(static_cast<int>(g));
      const json& jg = groups.at(grp.name);
      if (jg.at("rows").get<std::size_t>() != grp.rows ||
          jg.at("cols").get<std::size_t>() != grp.cols) {
        throw DataError(path + ": shape mismatch in group " + grp.name);
      }
      const auto data = jg.at("data").get<std::vector<double>>();
      if (data.size() != grp.data.size()) {
        throw DataError(path + ": size mismatch in group " + grp.name);
      }
      grp.data = data;
    }
    if (info) {
      info->normalization = j.value("normalization", "");
      info->init = j.value("init", "");
      info->train_config = j.value("train_config", "");
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace reccas
