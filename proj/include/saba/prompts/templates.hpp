#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "saba/core/types.hpp"
#include "saba/errors.hpp"
#include "saba/util.hpp"

namespace saba::prompts {

inline const char* template_filename(PromptKind kind) {
    switch (kind) {
        case PromptKind::ExtractStructure:  return "extract_structure.txt";
        case PromptKind::Align:             return "align.txt";
        case PromptKind::Verify:            return "verify.txt";
        case PromptKind::Aware:             return "aware.txt";
        case PromptKind::Decompose:         return "decompose.txt";
        case PromptKind::Hypothesize:       return "hypothesize.txt";
        case PromptKind::Synthesize:        return "synthesize.txt";
        case PromptKind::DirectAnswer:      return "direct_answer.txt";
        case PromptKind::SplitPropositions: return "split_propositions.txt";
    }
    return "direct_answer.txt";
}

// Built-in defaults; the files under templates/ ship with identical content
// and take precedence when a template directory is configured.
inline const char* builtin_template(PromptKind kind) {
    switch (kind) {
        case PromptKind::ExtractStructure:
            return
                "You are given a narrative split into numbered units.\n"
                "Decompose it into (a) a backbone sequence of core events in source order and\n"
                "(b) the heterogeneous attributes (actions, object states, locations,\n"
                "evidentiary descriptors) scattered across the units.\n"
                "\n"
                "Narrative units:\n"
                "{{narrative}}\n"
                "\n"
                "Reply with a single JSON object:\n"
                "{\"events\": [{\"description\": \"...\", \"source_units\": [\"u1\"]}],\n"
                " \"attributes\": [{\"description\": \"...\", \"kind\": \"Action|ObjectState|Location|EvidentiaryDescriptor|Other\",\n"
                "                  \"source_units\": [\"u1\"]}]}\n"
                "Events must be non-empty and in source order. Every attribute must cite at\n"
                "least one source unit id.\n";
        case PromptKind::Align:
            return
                "Bind each attribute to the backbone event(s) it qualifies, judging semantic\n"
                "relevance, temporal proximity, and entity overlap. An attribute that spans\n"
                "several events may map to all of them.\n"
                "\n"
                "Events:\n"
                "{{events}}\n"
                "\n"
                "Attributes:\n"
                "{{attributes}}\n"
                "\n"
                "Reply with a single JSON object:\n"
                "{\"alignment\": [{\"attribute\": \"att-1\", \"events\": [\"evt-1\", \"evt-2\"]}]}\n";
        case PromptKind::Verify:
            return
                "Check one aligned unit against the rest of the aligned narrative for\n"
                "temporal, entity-state, and causal consistency. Do not discard information;\n"
                "annotate it.\n"
                "\n"
                "Unit under review:\n"
                "{{unit}}\n"
                "\n"
                "Context units:\n"
                "{{context}}\n"
                "\n"
                "Reply with a single JSON object:\n"
                "{\"verdict\": \"Consistent|Conflict|Doubt\", \"note\": \"...\",\n"
                " \"referenced_units\": [\"evt-2\"]}\n"
                "Use Conflict for contradictions with other units, Doubt for missing causal\n"
                "links or unexplained facts. Conflict and Doubt require a note.\n";
        case PromptKind::Aware:
            return
                "Before answering, diagnose what is missing. Given the current reasoning\n"
                "state and the task, list the obstacles: missing or underspecified premises\n"
                "that block a task dimension. Return an empty list when the state already\n"
                "supports a sound conclusion.\n"
                "\n"
                "Task:\n"
                "{{task}}\n"
                "\n"
                "Reasoning state:\n"
                "{{state}}\n"
                "\n"
                "Reply with a single JSON object:\n"
                "{\"obstacles\": [{\"type\": \"MissingLink|Ambiguity|MotiveGap|...\",\n"
                "                 \"dimension\": \"Suspect|Motive|ModusOperandi|Answer|...\",\n"
                "                 \"requirement\": \"the missing premise, stated concretely\"}]}\n";
        case PromptKind::Decompose:
            return
                "Decompose one reasoning obstacle into concrete sub-queries. Each query must\n"
                "target a specific component of the stated requirement and be answerable\n"
                "from the narrative evidence.\n"
                "\n"
                "Obstacle:\n"
                "{{obstacle}}\n"
                "\n"
                "Reasoning state:\n"
                "{{state}}\n"
                "\n"
                "Reply with a single JSON object:\n"
                "{\"queries\": [\"...\", \"...\"]}\n";
        case PromptKind::Hypothesize:
            return
                "Answer one sub-query with a tentative hypothesis that bridges the gap.\n"
                "Cite the state item ids that support it. If the hypothesis conflicts with\n"
                "evidence or is weakly supported, set \"flag\" to true. If it revises an\n"
                "earlier hypothesis, name that hypothesis id in \"revises\".\n"
                "\n"
                "Query:\n"
                "{{query}}\n"
                "\n"
                "Reasoning state:\n"
                "{{state}}\n"
                "\n"
                "Reply with a single JSON object:\n"
                "{\"statement\": \"...\", \"evidence\": [\"evt-1\"], \"flag\": false,\n"
                " \"revises\": null}\n";
        case PromptKind::Synthesize:
            return
                "Synthesize the final conclusion from the reasoning state. Answer every task\n"
                "dimension, grounded in the accumulated evidence, queries, and hypotheses.\n"
                "\n"
                "Task:\n"
                "{{task}}\n"
                "\n"
                "Reasoning state:\n"
                "{{state}}\n"
                "\n"
                "Reply with a single JSON object:\n"
                "{\"answers\": {\"Suspect\": \"...\", \"Motive\": \"...\"}, \"rationale\": \"...\"}\n"
                "The answers object must contain exactly the task dimensions.\n";
        case PromptKind::DirectAnswer:
            return
                "{{preamble}}Read the narrative and answer the task.\n"
                "\n"
                "Narrative:\n"
                "{{narrative}}\n"
                "\n"
                "Task:\n"
                "{{task}}\n"
                "\n"
                "Reply with a single JSON object:\n"
                "{\"answers\": {\"Suspect\": \"...\"}, \"rationale\": \"...\"}\n"
                "The answers object must contain exactly the task dimensions.\n";
        case PromptKind::SplitPropositions:
            return
                "Decompose the text into atomic propositions: one factual claim each,\n"
                "self-contained, no conjunctions.\n"
                "\n"
                "Text:\n"
                "{{text}}\n"
                "\n"
                "Reply with a single JSON object:\n"
                "{\"propositions\": [\"...\", \"...\"]}\n";
    }
    return "";
}

// Auxiliary templates not tied to a prompt kind's default schema.
inline const char* builtin_named_template(const std::string& name) {
    if (name == "verify_batch")
        return
            "Check every aligned unit against the rest of the aligned narrative for\n"
            "temporal, entity-state, and causal consistency. Do not discard\n"
            "information; annotate it.\n"
            "\n"
            "Aligned units:\n"
            "{{context}}\n"
            "\n"
            "Reply with a single JSON object holding one entry per unit:\n"
            "{\"comments\": [{\"unit\": \"evt-1\", \"verdict\": \"Consistent|Conflict|Doubt\",\n"
            "                \"note\": \"...\", \"referenced_units\": []}]}\n"
            "Use Conflict for contradictions with other units, Doubt for missing causal\n"
            "links or unexplained facts. Conflict and Doubt require a note.\n";
    return "";
}

// Renders {{placeholder}} substitutions; unresolved placeholders are an error.
inline std::string render(const std::string& template_text,
                          const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(template_text.size());
    size_t pos = 0;
    while (pos < template_text.size()) {
        size_t open = template_text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(template_text, pos, std::string::npos);
            break;
        }
        size_t close = template_text.find("}}", open + 2);
        if (close == std::string::npos)
            throw Error(ErrorClass::InputValidation, "unterminated placeholder in template");
        out.append(template_text, pos, open - pos);
        std::string key = template_text.substr(open + 2, close - open - 2);
        auto it = values.find(key);
        if (it == values.end())
            throw Error(ErrorClass::InputValidation, "unresolved template placeholder '" + key + "'");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

class TemplateRegistry {
public:
    TemplateRegistry() = default;

    // Directory override; files present there shadow the built-ins.
    explicit TemplateRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::string text_for(PromptKind kind) const {
        if (!dir_.empty()) {
            auto path = dir_ / template_filename(kind);
            if (std::filesystem::exists(path)) return util::read_file(path);
        }
        return builtin_template(kind);
    }

    std::string render_for(PromptKind kind, const std::map<std::string, std::string>& values) const {
        return render(text_for(kind), values);
    }

    std::string named_text(const std::string& name) const {
        if (!dir_.empty()) {
            auto path = dir_ / (name + ".txt");
            if (std::filesystem::exists(path)) return util::read_file(path);
        }
        const char* builtin = builtin_named_template(name);
        if (builtin[0] == '\0')
            throw Error(ErrorClass::InputValidation, "unknown template '" + name + "'");
        return builtin;
    }

    std::string render_named(const std::string& name,
                             const std::map<std::string, std::string>& values) const {
        return render(named_text(name), values);
    }

private:
    std::filesystem::path dir_;
};

} // namespace saba::prompts
