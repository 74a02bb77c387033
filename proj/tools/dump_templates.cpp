// Writes the built-in prompt templates to a directory so they can be edited
// and passed back through --templates. Usage: saba_dump_templates <dir>
#include <filesystem>
#include <iostream>

#include "saba/prompts/templates.hpp"
#include "saba/util.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: saba_dump_templates <dir>\n";
        return 2;
    }
    namespace fs = std::filesystem;
    const fs::path dir = argv[1];
    fs::create_directories(dir);
    using saba::PromptKind;
    for (PromptKind kind :
         {PromptKind::ExtractStructure, PromptKind::Align, PromptKind::Verify, PromptKind::Aware,
          PromptKind::Decompose, PromptKind::Hypothesize, PromptKind::Synthesize,
          PromptKind::DirectAnswer, PromptKind::SplitPropositions}) {
        const auto name = saba::prompts::template_filename(kind);
        saba::util::write_file_atomic(dir / name, saba::prompts::builtin_template(kind));
        std::cout << (dir / name).string() << "\n";
    }
    saba::util::write_file_atomic(dir / "verify_batch.txt",
                                  saba::prompts::builtin_named_template("verify_batch"));
    std::cout << (dir / "verify_batch.txt").string() << "\n";
    return 0;
}
