#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saba/backend/mock.hpp"
#include "saba/backend/provider.hpp"
#include "saba/data/dataset.hpp"
#include "saba/qsr/engine.hpp"

namespace testsupport {

// Self-deleting scratch directory for trace and cache output.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

std::filesystem::path source_root();
std::filesystem::path fixture_path(const std::string& rel);

saba::backend::ModelClient fixture_client(bool cache_enabled = true);
saba::data::CaseSpec load_fixture_case(const std::string& name);

saba::RunConfig config_for(saba::Variant variant);

// Runs a fixture case end to end against the scripted backend.
saba::RunResult run_fixture(const std::string& case_name, saba::Variant variant);

// Maximum-cardinality matching over pairs with similarity >= threshold,
// via augmenting paths. Used as the oracle the greedy matcher is compared to.
int max_matching_size(const std::vector<std::vector<double>>& sim, double threshold);

std::vector<std::vector<double>> random_similarity_matrix(std::mt19937& rng, int max_side);

} // namespace testsupport
