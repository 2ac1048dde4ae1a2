#pragma once

#include <string>

#include "reccas/models.hpp"

namespace reccas {

// Provenance stored alongside the parameters.
struct ModelFileInfo {
  std::string normalization = "first real infection at t=1, world node at t=0";
  std::string init;          // initialization recipe
  std::string train_config;  // JSON echo of the last training invocation
};

// Versioned JSON model file: schema_version, family tag, sizes, cell type,
// epoch counter, provenance strings, and every parameter group verbatim.
// Fixture models hold literal probability tables and are not serializable.
void save_model(const std::string& path, const Model& model,
                const ModelFileInfo& info = {});

// Validates the schema version, family tag and group shapes (by rebuilding
// the family skeleton and matching groups one by one).
Model load_model(const std::string& path, ModelFileInfo* info = nullptr);

}  // namespace reccas
