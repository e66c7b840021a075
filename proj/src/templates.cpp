#include "personaforge/templates.hpp"

#include <fmt/format.h>

#include "personaforge/error.hpp"
#include "personaforge/io.hpp"

namespace personaforge {

PromptTemplate::PromptTemplate(std::string source) : source_(std::move(source)) {
    std::size_t pos = 0;
    while (pos < source_.size()) {
        auto open = source_.find("{{", pos);
        if (open == std::string::npos) {
            segments_.push_back({false, source_.substr(pos)});
            break;
        }
        auto close = source_.find("}}", open + 2);
        if (close == std::string::npos) {
            throw TemplateError(fmt::format("unterminated slot at offset {}", open));
        }
        if (open > pos) segments_.push_back({false, source_.substr(pos, open - pos)});
        segments_.push_back({true, source_.substr(open + 2, close - open - 2)});
        pos = close + 2;
    }
}

std::string PromptTemplate::render(const std::map<std::string, std::string, std::less<>>& values) const {
    std::string out;
    out.reserve(source_.size() + 256);
    for (const auto& seg : segments_) {
        if (!seg.is_slot) {
            out += seg.text;
            continue;
        }
        auto it = values.find(seg.text);
        if (it == values.end() || it->second.empty()) {
            throw TemplateError(fmt::format("slot [{}] left unfilled", seg.text));
        }
        out += it->second;
    }
    return out;
}

std::vector<std::string> PromptTemplate::slots() const {
    std::vector<std::string> out;
    for (const auto& seg : segments_) {
        if (seg.is_slot) out.push_back(seg.text);
    }
    return out;
}

namespace {

PromptTemplates make_defaults() {
    PromptTemplates t;

    t.questionnaire_system =
        "TASK:\n"
        "Indicate your level of agreement or disagreement with the statement in the "
        "CHARACTERISTICS according to your PERSONALITY. Use only the PROVIDED OPTIONS.\n"
        "\n"
        "PERSONALITY:\n"
        "```\n"
        "{{TRAIT PROMPT}}\n"
        "```\n"
        "\n"
        "PROVIDED OPTIONS:\n"
        "- disagree strongly with the statement\n"
        "- disagree a little with the statement\n"
        "- agree nor disagree with the statement\n"
        "- agree a little with the statement\n"
        "- agree strongly with the statement\n"
        "\n"
        "Provide your output only from the constant list ['disagree strongly with the statement', "
        "'disagree a little with the statement', 'agree nor disagree with the statement', "
        "'agree a little with the statement', 'agree strongly with the statement'] without "
        "explanation.";
    t.questionnaire_user =
        "CHARACTERISTICS:\n"
        "```\n"
        "{{STATEMENT}}\n"
        "```";

    t.generation_system =
        "TASK:\n"
        "Answer the QUESTION according to your PERSONALITY. Use INSTRUCTION. Use at most 5 "
        "sentences. Do not mention your personality traits in the text. Type only the answer, "
        "without the information about your personality score.\n"
        "\n"
        "PERSONALITY:\n"
        "{{PERSONALITY LINES}}\n"
        "\n"
        "INSTRUCTION:\n"
        "{{RATING LINE}}\n"
        "{{DEFINITION LINES}}";
    t.generation_personality_line = "- Your personality trait {{TRAIT}} is rated as {{SCORE}}.";
    t.generation_rating_line =
        "- The personality trait is rated from 1 to 5. 1 is the lowest score and 5 is the "
        "highest score.";
    t.generation_definition_lines =
        "- {{DEFINITION OF LOW SCORE}}\n"
        "- {{DEFINITION OF HIGH SCORE}}";
    t.generation_user =
        "QUESTION:\n"
        "```\n"
        "{{QUESTION}}\n"
        "```";

    t.classifier_system =
        "You will be provided with answers to questions. Detect the score of {{TRAIT}} for the "
        "author of the INPUT from the list [-2, -1, 0, 1, 2] or Nondistinguishable. Use "
        "INSTRUCTION.\n"
        "TASK:\n"
        "1. First, list CLUES (i.e., keywords, phrases, contextual information, semantic "
        "relations, semantic meaning, tones, references) that support the score determination "
        "of {{TRAIT}} of INPUT.\n"
        "2. Second, deduce the diagnostic REASONING process from premises (i.e., clues, input) "
        "that supports the INPUT score determination (Limit the number of words to 130).\n"
        "3. Third, based on clues, reasoning and input, determine the score of {{TRAIT}} for the "
        "author of INPUT from the list [-2, -1, 0, 1, 2] or Nondistinguishable.\n"
        "4. Mark what made you choose this score as decision type: Explicit signs, Implicit "
        "signs, Intuition, Nondistinguishable.\n"
        "5. Provide your output in JSON format with the keys: score, clues, reasoning, decision "
        "type.\n"
        "PROVIDE ONLY JSON.\n"
        "\n"
        "INSTRUCTION:\n"
        "- Definition: {{DEFINITION}}\n"
        "- High score of {{TRAIT}} (maximum 2):\n"
        "'{{DEFINITION OF HIGH SCORE}}'\n"
        "- Low score of {{TRAIT}} (minimum -2):\n"
        "'{{DEFINITION OF LOW SCORE}}'\n"
        "- Explicit signs: The person mentions obvious facts that are connected with this trait "
        "score.\n"
        "- Implicit signs: The person mentions facts that may imply them having this trait "
        "score.\n"
        "- Intuition: My intuition tells that the person has this trait score.\n"
        "- Nondistinguishable: I can't tell what trait score the person has.\n"
        "- If the text does not contain substantial, significant, and convincing indicators of "
        "the trait score, then use Nondistinguishable.\n"
        "- Choose something other than Nondistinguishable if you have a high degree of "
        "confidence in the answer.";
    t.classifier_user =
        "Question: {{QUESTION}}\n"
        "INPUT: {{ANSWER}}";
    t.classifier_json_reminder = "\n\nPROVIDE ONLY JSON.";
    return t;
}

} // namespace

const PromptTemplates& PromptTemplates::defaults() {
    static const PromptTemplates kDefaults = make_defaults();
    return kDefaults;
}

PromptTemplates PromptTemplates::with_overrides(const std::filesystem::path& dir) {
    PromptTemplates t = defaults();
    auto load = [&](const char* name, std::string& member) {
        auto p = dir / (std::string(name) + ".txt");
        if (std::filesystem::exists(p)) member = io::read_file(p);
    };
    load("questionnaire_system", t.questionnaire_system);
    load("questionnaire_user", t.questionnaire_user);
    load("generation_system", t.generation_system);
    load("generation_personality_line", t.generation_personality_line);
    load("generation_rating_line", t.generation_rating_line);
    load("generation_definition_lines", t.generation_definition_lines);
    load("generation_user", t.generation_user);
    load("classifier_system", t.classifier_system);
    load("classifier_user", t.classifier_user);
    load("classifier_json_reminder", t.classifier_json_reminder);
    return t;
}

} // namespace personaforge
