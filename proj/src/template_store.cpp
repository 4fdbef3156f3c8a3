#include "httpfuzz/template_store.hpp"

#include <fstream>

#include <json.hpp>

#include "httpfuzz/codec.hpp"

namespace httpfuzz {

using nlohmann::json;

std::string to_string(TemplateOrigin o) {
    switch (o) {
        case TemplateOrigin::Captured: return "captured";
        case TemplateOrigin::LlmGeneratedType0: return "llm_type0";
        case TemplateOrigin::LlmGeneratedType1: return "llm_type1";
        case TemplateOrigin::MutationPromoted: return "promoted";
    }
    return "?";
}

TemplateOrigin template_origin_from_string(std::string_view s) {
    if (s == "captured") return TemplateOrigin::Captured;
    if (s == "llm_type0") return TemplateOrigin::LlmGeneratedType0;
    if (s == "llm_type1") return TemplateOrigin::LlmGeneratedType1;
    if (s == "promoted") return TemplateOrigin::MutationPromoted;
    throw std::invalid_argument("bad TemplateOrigin: " + std::string(s));
}

long SeedTemplate::mutation_space_size() const {
    long n = 0;
    for (const auto& [_, values] : mutation_space) n += static_cast<long>(values.size());
    return n;
}

const FieldDescriptor* SeedTemplate::find_field(std::string_view name) const {
    for (const auto& f : annotated.fields)
        if (f.name == name) return &f;
    return nullptr;
}

bool TemplatePool::exists(const std::string& id) const { return index_.count(id) > 0; }

const SeedTemplate& TemplatePool::get(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownTemplate("no template with id " + id);
    return templates_[it->second];
}

SeedTemplate& TemplatePool::get_mutable(const std::string& id) {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownTemplate("no template with id " + id);
    return templates_[it->second];
}

std::string TemplatePool::dedup_key(const SeedTemplate& tpl) const {
    std::string key = tpl.annotated.annotated_bytes();
    key += '\0';
    for (const auto& [field, values] : tpl.mutation_space) {
        key += field;
        key += '\x01';
        for (const auto& v : values) {
            key += v;
            key += '\x02';
        }
    }
    return key;
}

std::string TemplatePool::add_template(SeedTemplate tpl, bool carry_stats) {
    for (const auto& [field, _] : tpl.mutation_space)
        if (!tpl.find_field(field))
            throw UnknownField("mutation space names unknown field: " + field);

    std::string key = dedup_key(tpl);
    if (dedup_.count(key))
        throw DuplicateTemplate("identical annotated bytes and mutation space already pooled");

    if (tpl.id.empty()) tpl.id = "t" + std::to_string(next_id_);
    ++next_id_;
    if (index_.count(tpl.id)) throw DuplicateTemplate("id already in use: " + tpl.id);
    if (!carry_stats) {
        tpl.alpha = kPriorAlpha;
        tpl.beta = kPriorBeta;
        tpl.invocation_count = 0;
    }
    dedup_.insert(std::move(key));
    index_[tpl.id] = templates_.size();
    std::string id = tpl.id;
    templates_.push_back(std::move(tpl));
    return id;
}

void TemplatePool::record_feedback(const std::string& id, bool rewarded) {
    SeedTemplate& tpl = get_mutable(id);
    if (rewarded)
        ++tpl.alpha;
    else
        ++tpl.beta;
    ++tpl.invocation_count;
}

std::size_t TemplatePool::extend_mutation_space(const std::string& id, const std::string& field,
                                                const std::vector<std::string>& values) {
    SeedTemplate& tpl = get_mutable(id);
    if (!tpl.find_field(field)) throw UnknownField("template has no field: " + field);
    auto& list = tpl.mutation_space[field];
    std::size_t added = 0;
    for (const auto& v : values) {
        if (std::find(list.begin(), list.end(), v) == list.end()) {
            list.push_back(v);
            ++added;
        }
    }
    return added;
}

std::vector<std::string> TemplatePool::ids_for_path(std::string_view path) const {
    std::vector<std::string> ids;
    for (const auto& tpl : templates_)
        if (tpl.annotated.source.path() == path) ids.push_back(tpl.id);
    return ids;
}

bool TemplatePool::note_fingerprint(const std::string& route, const std::string& fingerprint_key) {
    return seen_fingerprints_.insert({route, fingerprint_key}).second;
}

bool TemplatePool::fingerprint_seen(const std::string& route,
                                    const std::string& fingerprint_key) const {
    return seen_fingerprints_.count({route, fingerprint_key}) > 0;
}

void TemplatePool::save(const std::filesystem::path& file) const {
    std::ofstream f(file, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    for (const auto& tpl : templates_) {
        json row;
        row["type"] = "template";
        row["id"] = tpl.id;
        row["origin"] = to_string(tpl.origin);
        row["alpha"] = tpl.alpha;
        row["beta"] = tpl.beta;
        row["invocations"] = tpl.invocation_count;
        row["last_score"] = tpl.last_score;
        row["source_b64"] = base64_encode(tpl.annotated.source.original());
        json fields = json::array();
        for (const auto& fd : tpl.annotated.fields)
            fields.push_back({{"name", fd.name},
                              {"location", to_string(fd.location)},
                              {"type", to_string(fd.value_type)},
                              {"offset", fd.offset},
                              {"length", fd.length}});
        row["fields"] = fields;
        json space = json::object();
        for (const auto& [field, values] : tpl.mutation_space) {
            json list = json::array();
            for (const auto& v : values) list.push_back(base64_encode(v));
            space[field] = list;
        }
        row["space"] = space;
        f << row.dump() << "\n";
    }
    for (const auto& [route, fp] : seen_fingerprints_) {
        json row;
        row["type"] = "fingerprint";
        row["route"] = route;
        row["key"] = fp;
        f << row.dump() << "\n";
    }
}

TemplatePool TemplatePool::load(const std::filesystem::path& file) {
    std::ifstream f(file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + file.string());
    TemplatePool pool;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json row = json::parse(line);
        if (row.at("type") == "fingerprint") {
            pool.note_fingerprint(row.at("route"), row.at("key"));
            continue;
        }
        auto source = base64_decode(row.at("source_b64").get<std::string>());
        if (!source) throw std::runtime_error("corrupt source bytes in pool file");
        RawHttpRequest req = RawHttpRequest::parse(*source, ParseMode::Lenient);

        std::vector<FieldDescriptor> fields;
        for (const auto& fj : row.at("fields")) {
            FieldDescriptor fd;
            fd.name = fj.at("name");
            fd.location = param_location_from_string(fj.at("location").get<std::string>());
            fd.value_type = value_type_from_string(fj.at("type").get<std::string>());
            fd.offset = fj.at("offset");
            fd.length = fj.at("length");
            fd.current_value = source->substr(fd.offset, fd.length);
            fields.push_back(std::move(fd));
        }

        SeedTemplate tpl;
        tpl.id = row.at("id");
        tpl.origin = template_origin_from_string(row.at("origin").get<std::string>());
        tpl.alpha = row.at("alpha");
        tpl.beta = row.at("beta");
        tpl.invocation_count = row.at("invocations");
        tpl.last_score = row.at("last_score");
        tpl.annotated = make_annotated(req, std::move(fields));
        for (const auto& [field, values] : row.at("space").items()) {
            for (const auto& v : values) {
                auto dec = base64_decode(v.get<std::string>());
                if (!dec) throw std::runtime_error("corrupt mutation-space value in pool file");
                tpl.mutation_space[field].push_back(*dec);
            }
        }
        pool.add_template(std::move(tpl), /*carry_stats=*/true);
    }
    return pool;
}

FeedbackLog::FeedbackLog(const std::filesystem::path& file) : file_(file) {}

void FeedbackLog::append(const std::string& id, bool rewarded) {
    std::ofstream f(file_, std::ios::binary | std::ios::app);
    if (!f) throw std::runtime_error("cannot append " + file_.string());
    json row;
    row["id"] = id;
    row["rewarded"] = rewarded;
    f << row.dump() << "\n";
}

void replay_feedback_log(TemplatePool& pool, const std::filesystem::path& file) {
    std::ifstream f(file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + file.string());
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json row = json::parse(line);
        pool.record_feedback(row.at("id"), row.at("rewarded").get<bool>());
    }
}

}  // namespace httpfuzz
