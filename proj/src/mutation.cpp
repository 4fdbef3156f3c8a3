#include "httpfuzz/mutation.hpp"

#include <algorithm>
#include <fstream>

#include "httpfuzz/codec.hpp"

namespace httpfuzz {

namespace {

const char* kBoundaryValues[] = {"0",           "-1",          "2147483647",
                                 "4294967295",  "-2147483648", "99999999999999999999"};

const std::string kControlChars[] = {std::string(1, '\0'), "\n", "\r", "\t"};

std::string pick(const std::vector<std::string>& list, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d(0, list.size() - 1);
    return list[d(rng)];
}

std::string havoc(std::string value, std::mt19937_64& rng) {
    if (value.empty()) value = "A";
    std::uniform_int_distribution<int> nops(1, 4);
    int n = nops(rng);
    for (int i = 0; i < n; ++i) {
        std::uniform_int_distribution<int> which(0, 5);
        std::uniform_int_distribution<std::size_t> at(0, value.empty() ? 0 : value.size() - 1);
        std::uniform_int_distribution<int> byte(0, 255);
        switch (which(rng)) {
            case 0: {  // bit flip
                if (value.empty()) break;
                std::size_t p = at(rng);
                value[p] = static_cast<char>(value[p] ^ (1 << (byte(rng) & 7)));
                break;
            }
            case 1: {  // byte insert
                std::size_t p = value.empty() ? 0 : at(rng);
                value.insert(value.begin() + static_cast<std::ptrdiff_t>(p),
                             static_cast<char>(byte(rng)));
                break;
            }
            case 2: {  // byte delete
                if (value.size() < 2) break;
                value.erase(at(rng), 1);
                break;
            }
            case 3: {  // byte duplicate
                if (value.empty()) break;
                std::size_t p = at(rng);
                value.insert(value.begin() + static_cast<std::ptrdiff_t>(p), value[p]);
                break;
            }
            case 4: {  // block repeat
                if (value.empty()) break;
                std::size_t p = at(rng);
                std::size_t len = std::min<std::size_t>(value.size() - p, 1 + (byte(rng) & 7));
                value.insert(p, value.substr(p, len));
                break;
            }
            case 5: {  // block splice (swap two halves of a block)
                if (value.size() < 4) break;
                std::size_t p = at(rng) % (value.size() / 2);
                std::size_t len = std::min<std::size_t>(value.size() - 2 * p, 2 + (byte(rng) & 3));
                std::string a = value.substr(p, len), b = value.substr(value.size() - p - len, len);
                value.replace(p, len, b);
                value.replace(value.size() - p - len, len, a);
                break;
            }
        }
    }
    return value;
}

std::string substitute_marker(std::string payload, std::string_view marker) {
    const std::string token = "{MARKER}";
    std::size_t pos;
    while ((pos = payload.find(token)) != std::string::npos)
        payload.replace(pos, token.size(), marker);
    return payload;
}

// Escapes bytes that would break request framing when the field lives in the
// request line or a header.
std::string escape_for_region(std::string_view value, ParamKind kind) {
    bool line_region = kind == ParamKind::Path || kind == ParamKind::QueryString;
    bool header_region = kind == ParamKind::Header || kind == ParamKind::Cookie;
    if (!line_region && !header_region) return std::string(value);
    std::string out;
    for (char c : value) {
        bool unsafe = c == '\r' || c == '\n' || c == '\0' || (line_region && c == ' ');
        if (unsafe) {
            static const char digits[] = "0123456789ABCDEF";
            auto u = static_cast<unsigned char>(c);
            out += '%';
            out += digits[(u >> 4) & 0xf];
            out += digits[u & 0xf];
        } else {
            out += c;
        }
    }
    return out;
}

}  // namespace

std::string to_string(MutationOperator op) {
    switch (op) {
        case MutationOperator::Boundary: return "boundary";
        case MutationOperator::ContextPick: return "context";
        case MutationOperator::SpecialChars: return "specialchars";
        case MutationOperator::DictionaryInject: return "dictionary";
        case MutationOperator::Havoc: return "havoc";
    }
    return "?";
}

MutationDictionary MutationDictionary::load(const std::filesystem::path& file) {
    std::ifstream f(file);
    if (!f) throw std::runtime_error("cannot read dictionary " + file.string());
    MutationDictionary dict;
    std::vector<std::string>* section = nullptr;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            std::string name = line.substr(1, line.size() - 2);
            if (name == "command_injection") section = &dict.command_injection;
            else if (name == "buffer_overflow") section = &dict.buffer_overflow;
            else if (name == "integer_overflow") section = &dict.integer_overflow;
            else if (name == "path_traversal") section = &dict.path_traversal;
            else if (name == "special_characters") section = &dict.special_characters;
            else section = nullptr;
            continue;
        }
        if (!section) continue;
        // \xNN escapes let the file carry raw bytes.
        std::string decoded;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '\\' && i + 3 < line.size() && line[i + 1] == 'x') {
                auto hex = hex_decode(line.substr(i + 2, 2));
                if (hex) {
                    decoded += *hex;
                    i += 3;
                    continue;
                }
            }
            if (line[i] == '\\' && i + 1 < line.size()) {
                char c = line[i + 1];
                if (c == 'n' || c == 'r' || c == 't' || c == '0') {
                    decoded += c == 'n' ? '\n' : c == 'r' ? '\r' : c == 't' ? '\t' : '\0';
                    ++i;
                    continue;
                }
            }
            decoded += line[i];
        }
        // Repeat syntax for long payloads: {REPEAT:c:count}
        if (decoded.rfind("{REPEAT:", 0) == 0) {
            auto c1 = decoded.find(':', 8);
            auto end = decoded.find('}');
            if (c1 != std::string::npos && end != std::string::npos) {
                char ch = decoded[8];
                int count = std::stoi(decoded.substr(c1 + 1, end - c1 - 1));
                decoded = std::string(static_cast<std::size_t>(count), ch);
            }
        }
        section->push_back(decoded);
    }
    for (const auto& p : dict.command_injection)
        if (p.find("{MARKER}") == std::string::npos)
            throw std::runtime_error("command-injection payload missing {MARKER}: " + p);
    return dict;
}

std::string apply_operator(std::string_view value, ValueType type, MutationOperator op,
                           const std::vector<std::string>& mutation_space,
                           const MutationDictionary& dict, std::string_view marker,
                           std::mt19937_64& rng) {
    switch (op) {
        case MutationOperator::Boundary: {
            if (type != ValueType::Int)
                throw IncompatibleOperator("boundary mutation needs an Int field");
            std::uniform_int_distribution<std::size_t> d(0, std::size(kBoundaryValues) - 1);
            return kBoundaryValues[d(rng)];
        }
        case MutationOperator::ContextPick: {
            if (mutation_space.empty())
                throw IncompatibleOperator("context pick needs a non-empty mutation space");
            std::uniform_int_distribution<std::size_t> d(0, mutation_space.size() - 1);
            return mutation_space[d(rng)];
        }
        case MutationOperator::SpecialChars: {
            std::string out(value);
            std::size_t n_ctl = std::size(kControlChars);
            std::size_t n_total = n_ctl + dict.special_characters.size();
            std::uniform_int_distribution<std::size_t> d(0, n_total - 1);
            std::size_t choice = d(rng);
            const std::string& special =
                choice < n_ctl ? kControlChars[choice] : dict.special_characters[choice - n_ctl];
            std::uniform_int_distribution<std::size_t> at(0, out.size());
            out.insert(at(rng), special);
            return out;
        }
        case MutationOperator::DictionaryInject: {
            std::vector<const std::vector<std::string>*> sections;
            for (const auto* s : {&dict.command_injection, &dict.buffer_overflow,
                                  &dict.integer_overflow, &dict.path_traversal})
                if (!s->empty()) sections.push_back(s);
            if (sections.empty())
                throw IncompatibleOperator("dictionary has no payload sections");
            std::uniform_int_distribution<std::size_t> d(0, sections.size() - 1);
            std::string payload = pick(*sections[d(rng)], rng);
            return std::string(value) + substitute_marker(std::move(payload), marker);
        }
        case MutationOperator::Havoc:
            return havoc(std::string(value), rng);
    }
    throw IncompatibleOperator("unknown operator");
}

std::map<MutationOperator, double> schedule_operators(const SeedTemplate& tpl,
                                                      const FieldDescriptor& field) {
    std::map<MutationOperator, double> w;
    if (field.value_type == ValueType::Int) w[MutationOperator::Boundary] = 1.0;
    auto it = tpl.mutation_space.find(field.name);
    if (it != tpl.mutation_space.end() && !it->second.empty())
        w[MutationOperator::ContextPick] = 3.0;
    w[MutationOperator::SpecialChars] = 1.0;
    w[MutationOperator::DictionaryInject] = 1.0;
    w[MutationOperator::Havoc] = 1.0;
    double total = 0.0;
    for (const auto& [_, v] : w) total += v;
    for (auto& [_, v] : w) v /= total;
    return w;
}

namespace {

MutationOperator pick_operator(const std::map<MutationOperator, double>& weights,
                               std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    double r = d(rng), acc = 0.0;
    for (const auto& [op, w] : weights) {
        acc += w;
        if (r <= acc) return op;
    }
    return weights.rbegin()->first;
}

// Decode-mutate-reencode closure for encoded value types.
std::string mutate_value(const FieldDescriptor& field, MutationOperator op,
                         const std::vector<std::string>& space, const MutationDictionary& dict,
                         std::string_view marker, std::mt19937_64& rng) {
    const std::string& v = field.current_value;
    switch (field.value_type) {
        case ValueType::Base64: {
            auto inner = base64_decode(v);
            return base64_encode(
                apply_operator(inner.value_or(v), ValueType::Str, op, space, dict, marker, rng));
        }
        case ValueType::Base32: {
            auto inner = base32_decode(v);
            return base32_encode(
                apply_operator(inner.value_or(v), ValueType::Str, op, space, dict, marker, rng));
        }
        case ValueType::HexEncoded: {
            auto inner = hex_decode(v);
            return hex_encode(
                apply_operator(inner.value_or(v), ValueType::Str, op, space, dict, marker, rng));
        }
        case ValueType::UrlEncoded: {
            auto inner = url_decode(v);
            return url_encode(
                apply_operator(inner.value_or(v), ValueType::Str, op, space, dict, marker, rng));
        }
        default:
            return apply_operator(v, field.value_type, op, space, dict, marker, rng);
    }
}

}  // namespace

Mutant mutate(const SeedTemplate& tpl, std::uint64_t rng_seed, const MutationDictionary& dict,
              std::string marker) {
    std::mt19937_64 rng(rng_seed);
    Mutant m;
    m.plan.template_id = tpl.id;
    m.plan.marker = std::move(marker);

    const auto& fields = tpl.annotated.fields;
    if (fields.empty()) {
        m.request = tpl.annotated.source;
        return m;
    }

    // 1 field with probability 0.7, otherwise up to 3.
    std::uniform_real_distribution<double> d(0.0, 1.0);
    std::size_t count = 1;
    if (d(rng) >= 0.7) {
        std::uniform_int_distribution<std::size_t> more(2, 3);
        count = std::min(more(rng), fields.size());
    }

    std::vector<std::size_t> idx(fields.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());

    const std::vector<std::string> empty_space;
    std::vector<SpanEdit> edits;
    for (std::size_t i : idx) {
        const FieldDescriptor& field = fields[i];
        auto weights = schedule_operators(tpl, field);
        MutationOperator op = pick_operator(weights, rng);
        auto sit = tpl.mutation_space.find(field.name);
        const auto& space = sit != tpl.mutation_space.end() ? sit->second : empty_space;
        std::string payload;
        try {
            payload = mutate_value(field, op, space, dict, m.plan.marker, rng);
        } catch (const IncompatibleOperator&) {
            op = MutationOperator::Havoc;
            payload = mutate_value(field, op, space, dict, m.plan.marker, rng);
        }
        if (op == MutationOperator::DictionaryInject &&
            payload.find(m.plan.marker) != std::string::npos)
            m.plan.command_payload = true;
        m.plan.edits.push_back({field.name, op, payload});
        edits.push_back({field.offset, field.length,
                         escape_for_region(payload, field.location.kind)});
    }

    std::string bytes = fix_content_length(
        apply_span_edits(tpl.annotated.source.original(), std::move(edits)));
    m.request = RawHttpRequest::parse(bytes, ParseMode::Lenient);
    return m;
}

}  // namespace httpfuzz
