#include "drex/templates.hpp"

namespace drex {

std::string render_classification_template(std::string_view arg1, std::string_view arg2,
                                           std::string_view sep, std::string_view mask) {
    std::string out;
    out.reserve(arg1.size() + arg2.size() + 2 * sep.size() + mask.size() + 64);
    out += "Arg1:";
    out += arg1;
    out += ".Arg2:";
    out += arg2;
    out += ".";
    out += sep;
    out += sep;
    out += "The conjunction between Arg1 and Arg2 is ";
    out += mask;
    out += ".";
    return out;
}

std::string render_generation_template(std::string_view arg1, std::string_view arg2,
                                       std::string_view label_word, std::string_view sep) {
    std::string out;
    out.reserve(arg1.size() + arg2.size() + 2 * sep.size() + label_word.size() + 80);
    out += "Arg1:";
    out += arg1;
    out += ".Arg2:";
    out += arg2;
    out += ".";
    out += sep;
    out += sep;
    out += "The conjunction between Arg1 and Arg2 is ";
    out += label_word;
    out += ", the main reason is that.";
    return out;
}

bool has_special_token_collision(std::string_view arg1, std::string_view arg2,
                                 std::string_view sep, std::string_view mask) {
    for (auto arg : {arg1, arg2}) {
        if (arg.find(sep) != std::string_view::npos ||
            arg.find(mask) != std::string_view::npos) {
            return true;
        }
    }
    return false;
}

} // namespace drex
