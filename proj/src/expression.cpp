#include "cosmo/expression.hpp"

#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <vector>

namespace cosmo {

namespace {

struct Arg {
    std::size_t position;
    std::string key;  // empty for a nested expression
    double number = 0.0;
    std::optional<ActivationSpec> nested;
};

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    ActivationSpec parse() {
        ActivationSpec spec = expr();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return spec;
    }

private:
    [[noreturn]] void fail(const std::string& message) const { throw ParseError(pos_, message); }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    std::string identifier() {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        if (start == pos_) fail("expected a name");
        return std::string(text_.substr(start, pos_ - start));
    }

    double number() {
        skip_space();
        const char* first = text_.data() + pos_;
        const char* last = text_.data() + text_.size();
        if (first != last && *first == '+') ++first;
        double value = 0.0;
        const auto res = std::from_chars(first, last, value);
        if (res.ec != std::errc()) fail("expected a number");
        pos_ = static_cast<std::size_t>(res.ptr - text_.data());
        return value;
    }

    Arg arg() {
        skip_space();
        Arg a;
        a.position = pos_;
        const std::size_t save = pos_;
        const std::string name = identifier();
        if (accept('=')) {
            a.key = name;
            a.number = number();
        } else {
            pos_ = save;
            a.nested = expr();
        }
        return a;
    }

    ActivationSpec expr() {
        skip_space();
        const std::size_t name_pos = pos_;
        const std::string name = identifier();
        std::vector<Arg> args;
        if (accept('(')) {
            if (!accept(')')) {
                do {
                    args.push_back(arg());
                } while (accept(','));
                expect(')');
            }
        }
        return build(name, name_pos, args);
    }

    ActivationSpec build(const std::string& name, std::size_t name_pos, const std::vector<Arg>& args) {
        std::map<std::string, double> kw;
        std::optional<ActivationSpec> nested;
        for (const Arg& a : args) {
            if (a.nested) {
                if (nested) throw ParseError(a.position, "only one nested activation is allowed");
                nested = a.nested;
            } else {
                if (kw.count(a.key)) throw ParseError(a.position, "duplicate argument '" + a.key + "'");
                kw[a.key] = a.number;
            }
        }

        const auto take = [&](std::initializer_list<const char*> keys, std::optional<double> fallback) {
            for (const char* k : keys) {
                auto it = kw.find(k);
                if (it != kw.end()) {
                    const double v = it->second;
                    kw.erase(it);
                    return v;
                }
            }
            if (!fallback) throw ParseError(name_pos, name + ": missing argument '" + *keys.begin() + "'");
            return *fallback;
        };

        std::optional<ActivationSpec> spec;
        try {
            if (name == "relu") {
                spec = ActivationSpec::relu();
            } else if (name == "sine" || name == "sin") {
                spec = ActivationSpec::sine(take({"omega0", "w0"}, 30.0));
            } else if (name == "gaussian" || name == "gauss") {
                spec = ActivationSpec::gaussian(take({"s", "scale"}, 1.0));
            } else if (name == "sinc") {
                spec = ActivationSpec::sinc(take({"s", "scale"}, 1.0));
            } else if (name == "raised_cosine" || name == "rc") {
                const double t = take({"T", "t"}, 1.0);
                spec = ActivationSpec::raised_cosine(t, take({"beta"}, 0.05));
            } else if (name == "cosmo") {
                if (!nested) throw ParseError(name_pos, "cosmo: expects a base activation");
                spec = ActivationSpec::cosmo(*nested, take({"zeta"}, std::nullopt));
                nested.reset();
            } else {
                throw ParseError(name_pos, "unknown activation '" + name + "'");
            }
        } catch (const ParseError&) {
            throw;
        } catch (const InvalidArgument& e) {
            throw ParseError(name_pos, e.what());
        }
        if (nested) throw ParseError(name_pos, name + ": does not take a nested activation");
        if (!kw.empty()) throw ParseError(name_pos, name + ": unknown argument '" + kw.begin()->first + "'");
        return *spec;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

ActivationSpec parse_activation(std::string_view text) { return Parser(text).parse(); }

}  // namespace cosmo
