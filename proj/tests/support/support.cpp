#include "support.hpp"

#include <cstdlib>
#include <functional>

namespace testsupport {

TempDir::TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::mt19937_64 rng(std::random_device{}());
    for (int attempt = 0; attempt < 64; ++attempt) {
        auto candidate = base / ("saba-test-" + std::to_string(rng()));
        std::error_code ec;
        if (std::filesystem::create_directory(candidate, ec)) {
            path_ = candidate;
            return;
        }
    }
    throw std::runtime_error("could not create a scratch directory");
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::filesystem::path source_root() { return SABA_SOURCE_DIR; }

std::filesystem::path fixture_path(const std::string& rel) {
    return source_root() / "data" / "fixtures" / rel;
}

saba::backend::ModelClient fixture_client(bool cache_enabled) {
    auto provider = std::make_shared<saba::backend::MockProvider>(
        saba::backend::MockProvider::from_file(fixture_path("mock_script.json")));
    saba::backend::ClientOptions options;
    options.cache_enabled = cache_enabled;
    return saba::backend::ModelClient(provider, options,
                                      std::make_shared<saba::backend::ResponseCache>());
}

saba::data::CaseSpec load_fixture_case(const std::string& name) {
    auto path = fixture_path("cases/" + name + ".json");
    return saba::data::case_from_json(saba::data::parse_json_file(path), path.string());
}

saba::RunConfig config_for(saba::Variant variant) {
    saba::RunConfig config;
    config.variant = variant;
    config.t_max = 3;
    config.gate_conflict_threshold = 0;
    config.gate_doubt_threshold = 0;
    config.temperature = 0.0;
    config.beam_width = 1;
    return config;
}

saba::RunResult run_fixture(const std::string& case_name, saba::Variant variant) {
    auto client = fixture_client();
    saba::prompts::TemplateRegistry templates;
    auto c = load_fixture_case(case_name);
    return saba::qsr::run(client, templates, c, config_for(variant));
}

int max_matching_size(const std::vector<std::vector<double>>& sim, double threshold) {
    const int rows = static_cast<int>(sim.size());
    const int cols = rows == 0 ? 0 : static_cast<int>(sim[0].size());
    std::vector<int> match_for_col(cols, -1);

    std::function<bool(int, std::vector<bool>&)> augment = [&](int row,
                                                               std::vector<bool>& visited) {
        for (int col = 0; col < cols; ++col) {
            if (sim[row][col] < threshold || visited[col]) continue;
            visited[col] = true;
            if (match_for_col[col] == -1 || augment(match_for_col[col], visited)) {
                match_for_col[col] = row;
                return true;
            }
        }
        return false;
    };

    int matched = 0;
    for (int row = 0; row < rows; ++row) {
        std::vector<bool> visited(cols, false);
        if (augment(row, visited)) ++matched;
    }
    return matched;
}

std::vector<std::vector<double>> random_similarity_matrix(std::mt19937& rng, int max_side) {
    std::uniform_int_distribution<int> side(1, max_side);
    std::uniform_real_distribution<double> value(0.0, 1.0);
    const int rows = side(rng);
    const int cols = side(rng);
    std::vector<std::vector<double>> sim(rows, std::vector<double>(cols));
    for (auto& row : sim)
        for (auto& cell : row) cell = value(rng);
    return sim;
}

} // namespace testsupport
