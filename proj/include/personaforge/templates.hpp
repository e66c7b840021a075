#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace personaforge {

/// Text with `{{SLOT NAME}}` placeholders. Rendering fails with TemplateError
/// when a slot has no value or an empty value, so no prompt is ever sent with
/// a hole in it.
class PromptTemplate {
public:
    explicit PromptTemplate(std::string source);

    std::string render(const std::map<std::string, std::string, std::less<>>& values) const;
    const std::string& source() const noexcept { return source_; }
    std::vector<std::string> slots() const;

private:
    struct Segment {
        bool is_slot;
        std::string text;
    };
    std::string source_;
    std::vector<Segment> segments_;
};

/// The prompt texts used by the three chat tasks. Defaults reproduce the
/// published templates; any member can be replaced from a file.
struct PromptTemplates {
    // questionnaire answering
    std::string questionnaire_system;
    std::string questionnaire_user;
    // text generation; personality and definition lines are repeated per trait
    std::string generation_system;
    std::string generation_personality_line;
    std::string generation_rating_line;
    std::string generation_definition_lines;
    std::string generation_user;
    // CARP classifier
    std::string classifier_system;
    std::string classifier_user;
    std::string classifier_json_reminder;

    static const PromptTemplates& defaults();
    /// Replaces members for which `<dir>/<member>.txt` exists.
    static PromptTemplates with_overrides(const std::filesystem::path& dir);
};

} // namespace personaforge
