#pragma once

// Enrollment-side fixture: an Authority in a throwaway home directory with a
// root, population CA, virtual and external sub-CAs, a TSA and a helpdesk
// operator credential.

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>

#include "eidpki/card/fingerprint.hpp"
#include "eidpki/core/error.hpp"
#include "eidpki/enrollment/authority.hpp"

namespace eidpki::test {

class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "eidpki-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline constexpr UnixTime kAuthorityStart = 1'750'000'000;

inline enrollment::EnrollmentApplication make_application(const std::string& applicant, Random& rng,
                                                          std::size_t fingers = 1) {
  enrollment::EnrollmentApplication a;
  a.applicant_id = applicant;
  a.biographic = {{"name", "Holder " + applicant}, {"birth_date", "1985-06-30"}, {"nationality", "ARE"}};
  a.portrait_hash = sha256(to_bytes("portrait:" + applicant));
  for (std::size_t i = 0; i < fingers; ++i) a.fingerprints.push_back(card::synthesize_template(rng, 30));
  return a;
}

struct AuthorityWorld {
  TempDir dir;
  ManualClock clock{kAuthorityStart};
  std::string seed;
  std::unique_ptr<enrollment::Authority> a;
  enrollment::OperatorCredential operator_cred;

  explicit AuthorityWorld(std::string seed_text = "world", bool setup = true) : seed(std::move(seed_text)) {
    reopen();
    if (!setup) return;
    ca::CaConfig root;
    root.ca_id = "root";
    root.policy = ca::make_policy("pol-root", "Root CA", {Profile::ca, Profile::device}, 7300);
    root.validity_days = 7300;
    a->init_root(root);
    a->setup_tsa("root", "tsa-1");

    ca::CaConfig pop;
    pop.ca_id = "pop";
    pop.policy = ca::make_policy("pol-pop", "Population CA",
                                 {Profile::ca, Profile::identity_auth, Profile::signature, Profile::encryption,
                                  Profile::attribute, Profile::device},
                                 3650);
    a->init_population("root", pop);

    ca::CaConfig v1;
    v1.ca_id = "v1";
    v1.validity_days = 1825;
    v1.policy = ca::make_policy("pol-v1", "Virtual sub-CA", {Profile::identity_auth, Profile::signature}, 1825);
    a->provision_virtual("pop", v1);

    a->certify_external("root", "ext",
                        ca::make_policy("pol-ext", "External sub-CA",
                                        {Profile::ca, Profile::identity_auth, Profile::signature}, 1825));
    operator_cred = a->issue_operator("helpdesk-1");
  }

  std::filesystem::path home() const { return dir.path() / "home"; }

  // Drops the in-memory state and rebuilds it from the audit log.
  void reopen() {
    a.reset();
    enrollment::AuthorityOptions o;
    o.home = home();
    o.clock = clock.clock();
    o.seed = seed;
    a = enrollment::Authority::open(std::move(o));
  }

  enrollment::EnrollResult enroll(const std::string& applicant, const std::string& issuer = "pop",
                                  const enrollment::RegistryRecord* registry = nullptr) {
    enrollment::RegistryRecord clean;
    clean.applicant_id = applicant;
    return a->enroll(make_application(applicant, a->rng()), registry ? *registry : clean, issuer, "1234");
  }
};

}  // namespace eidpki::test
