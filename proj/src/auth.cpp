#include "vqpu/auth.hpp"

#include <fstream>
#include <sstream>

#include "vqpu/errors.hpp"

namespace vqpu {

Role role_from_string(const std::string& s) {
    if (s == "user") return Role::User;
    if (s == "agent") return Role::Agent;
    if (s == "admin") return Role::Admin;
    throw Error(codes::kAuthFailed, "unknown role: " + s);
}

const char* to_string(Role r) {
    switch (r) {
        case Role::User: return "user";
        case Role::Agent: return "agent";
        case Role::Admin: return "admin";
    }
    return "user";
}

AuthTable AuthTable::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(codes::kAuthFailed, "cannot open api keys file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto j = nlohmann::json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw Error(codes::kAuthFailed, "api keys file is not valid JSON");
    return from_json(j);
}

AuthTable AuthTable::from_json(const nlohmann::json& j) {
    AuthTable table;
    for (const auto& entry : j.at("keys")) {
        Principal p;
        p.id = entry.at("principal").get<std::string>();
        p.role = role_from_string(entry.at("role").get<std::string>());
        table.add_key(entry.at("key").get<std::string>(), p);
    }
    return table;
}

void AuthTable::add_key(const std::string& key, Principal principal) {
    keys_[key] = std::move(principal);
}

std::optional<Principal> AuthTable::authenticate(const std::string& bearer_token) const {
    const auto it = keys_.find(bearer_token);
    if (it == keys_.end()) return std::nullopt;
    return it->second;
}

}  // namespace vqpu
