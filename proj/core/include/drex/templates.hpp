#pragma once

#include <string>
#include <string_view>

namespace drex {

/// Classification prompt. Byte-exact, no whitespace beyond the template:
/// "Arg1:{arg1}.Arg2:{arg2}.{sep}{sep}The conjunction between Arg1 and Arg2
/// is {mask}."
std::string render_classification_template(std::string_view arg1, std::string_view arg2,
                                           std::string_view sep, std::string_view mask);

/// Generation prompt:
/// "Arg1:{arg1}.Arg2:{arg2}.{sep}{sep}The conjunction between Arg1 and Arg2
/// is {label_word}, the main reason is that."
std::string render_generation_template(std::string_view arg1, std::string_view arg2,
                                       std::string_view label_word, std::string_view sep);

/// Arguments containing the literal separator or mask text render verbatim;
/// this reports the collision so callers can warn.
bool has_special_token_collision(std::string_view arg1, std::string_view arg2,
                                 std::string_view sep, std::string_view mask);

} // namespace drex
