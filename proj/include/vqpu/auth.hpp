#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace vqpu {

enum class Role { User, Agent, Admin };

struct Principal {
    std::string id;
    Role role = Role::User;
};

// Static API-key table. Keys file: {"keys":[{"key":..,"role":..,"principal":..}]}.
class AuthTable {
  public:
    static AuthTable from_file(const std::filesystem::path& path);
    static AuthTable from_json(const nlohmann::json& j);

    void add_key(const std::string& key, Principal principal);
    std::optional<Principal> authenticate(const std::string& bearer_token) const;
    bool empty() const { return keys_.empty(); }

  private:
    std::map<std::string, Principal> keys_;
};

Role role_from_string(const std::string& s);
const char* to_string(Role r);

}  // namespace vqpu
