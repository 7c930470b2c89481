#include "eidpki/enrollment/cli.hpp"

#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"
#include "eidpki/enrollment/authority.hpp"
#include "eidpki/enrollment/server.hpp"
#include "eidpki/enrollment/wire.hpp"
#include "eidpki/toolkit/toolkit.hpp"

namespace eidpki::enrollment {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string home;
  std::string addr;
  std::optional<std::string> seed;
  std::optional<std::int64_t> now;
  std::string output = "text";
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io-error", "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string trimmed(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream o(path, std::ios::binary | std::ios::trunc);
  if (!o) throw Error("io-error", "cannot write " + path.string());
  o << content;
}

// Result of one command: what to print and how it ends.
struct Outcome {
  Json body = Json::object();
  int exit_code = kExitOk;
};

void emit(const Globals& g, const Json& body, std::ostream& out) {
  if (g.output == "canonical") {
    out << body.dump() << "\n";
    return;
  }
  for (const auto& [key, value] : body.items()) {
    out << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
  }
}

class Context {
 public:
  Context(const Globals& g, std::string salt) : g_(g), salt_(std::move(salt)) {}

  bool remote() const { return !g_.addr.empty(); }

  Authority& authority(bool read_only = false) {
    if (!authority_) {
      AuthorityOptions o;
      o.home = g_.home;
      if (g_.now) o.clock = ManualClock(*g_.now).clock();
      o.seed = g_.seed;
      o.salt = salt_;
      o.read_only = read_only;
      authority_ = Authority::open(std::move(o));
    }
    return *authority_;
  }

  // Card-side work: local services need the writable authority (time-stamps
  // are audited); with --addr the state is only read for anchors and cards.
  toolkit::ValidationServices& services() {
    if (remote()) {
      if (!remote_) remote_ = std::make_unique<RemoteServices>(g_.addr);
      return *remote_;
    }
    return authority().services();
  }

  Authority& card_authority() { return authority(remote()); }

  void load_crls(const std::vector<std::string>& files) {
    for (const std::string& f : files) {
      crls_.put(revocation::Crl::decode(from_hex(trimmed(read_text(f)))));
    }
  }

  // CRLs for every CA not covered by a file given on the command line.
  void complete_crls() {
    std::vector<std::string> missing;
    for (const std::string& id : card_authority().registry().ca_ids()) {
      if (!crls_.find(id)) missing.push_back(id);
    }
    if (!missing.empty()) toolkit::download_crls(services(), missing, crls_);
  }

  toolkit::Toolkit toolkit() {
    Authority& a = card_authority();
    toolkit::ToolkitConfig cfg;
    cfg.anchors = a.anchors();
    cfg.repository = &a.registry();
    cfg.services = &services();
    cfg.crls = &crls_;
    cfg.clock = a.clock();
    cfg.rng = &a.rng();
    return toolkit::Toolkit(std::move(cfg));
  }

 private:
  const Globals& g_;
  std::string salt_;
  std::unique_ptr<Authority> authority_;
  std::unique_ptr<RemoteServices> remote_;
  toolkit::CrlStore crls_;
};

Json cert_summary(const Certificate& c) {
  return Json{{"issuer", c.fields.issuer_id},
              {"serial", c.fields.serial},
              {"subject", c.fields.subject_id},
              {"profile", to_string(c.fields.profile)},
              {"key_length_bits", c.fields.key_length_bits},
              {"not_after", c.fields.not_after}};
}

std::set<Profile> leaf_profiles() {
  return {Profile::identity_auth, Profile::signature, Profile::encryption, Profile::attribute, Profile::device};
}

std::string default_population(const Authority& a) {
  for (const std::string& id : a.hierarchy().ca_ids()) {
    if (a.hierarchy().ca(id).kind == ca::CaKind::population) return id;
  }
  throw Error("unknown-ca", "no population CA; run 'ca init-population' first");
}

std::string default_root(const Authority& a) {
  if (const ca::CertificationAuthority* r = a.hierarchy().root()) return r->ca_id;
  throw Error("unknown-ca", "no root CA; run 'ca init-root' first");
}

fs::path capture_path(const Authority& a, std::string_view applicant) {
  return a.home() / "captures" / std::string(applicant);
}

card::FingerprintTemplate live_probe(Authority& a, std::string_view card_id) {
  const CardRecord& record = a.card_record(card_id);
  const fs::path path = capture_path(a, record.applicant_id);
  if (!fs::exists(path)) throw Error("template-invalid", "no capture on file for " + record.applicant_id);
  const Json j = Json::parse(read_text(path));
  const card::FingerprintTemplate enrolled =
      card::FingerprintTemplate::decode(from_hex(j.at("templates").at(0).get<std::string>()));
  return card::recapture(enrolled, a.rng());
}


}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Globals g;
  CLI::App app{"eID PKI operator tool", "eidpki"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--home", g.home, "state directory")->envname("EIDPKI_HOME");
  app.add_option("--addr", g.addr, "service address host:port")->envname("EIDPKI_ADDR");
  app.add_option("--seed", g.seed, "fixed randomness seed");
  app.add_option("--now", g.now, "fixed clock, Unix seconds");
  app.add_option("--output", g.output, "text or canonical")->check(CLI::IsMember({"text", "canonical"}));

  auto sub = [](CLI::App* parent, const std::string& name, const std::string& desc) {
    CLI::App* s = parent->add_subcommand(name, desc);
    s->fallthrough();
    return s;
  };

  // ca
  CLI::App* ca_cmd = sub(&app, "ca", "certification authorities");
  ca_cmd->require_subcommand(1);
  std::string ca_id, parent_id, out_path;
  int validity_days = 0;
  CLI::App* init_root = sub(ca_cmd, "init-root", "create the root CA and its TSA");
  init_root->add_option("--id", ca_id)->required();
  init_root->add_option("--validity-days", validity_days);
  CLI::App* init_pop = sub(ca_cmd, "init-population", "create a population CA under the root");
  init_pop->add_option("--id", ca_id)->required();
  init_pop->add_option("--root", parent_id);
  init_pop->add_option("--validity-days", validity_days);
  CLI::App* certify_sub = sub(ca_cmd, "certify-sub", "certify an externally operated sub-CA");
  certify_sub->add_option("--id", ca_id)->required();
  certify_sub->add_option("--root", parent_id);
  CLI::App* provision_sub = sub(ca_cmd, "provision-sub", "provision a virtual sub-CA on a population CA");
  provision_sub->add_option("--id", ca_id)->required();
  provision_sub->add_option("--population", parent_id);
  provision_sub->add_option("--validity-days", validity_days);
  std::string operator_id;
  CLI::App* operator_cmd = sub(ca_cmd, "operator", "issue a helpdesk operator credential");
  operator_cmd->add_option("--id", operator_id)->required();
  operator_cmd->add_option("--out", out_path)->required();

  // enroll
  std::string applicant, full_name, birth_date, nationality, pin, portrait_file, issuer;
  std::size_t fingers = 1;
  CLI::App* enroll_cmd = sub(&app, "enroll", "enroll an applicant and issue a card");
  enroll_cmd->add_option("--applicant", applicant)->required();
  enroll_cmd->add_option("--name", full_name)->required();
  enroll_cmd->add_option("--birth-date", birth_date)->required();
  enroll_cmd->add_option("--nationality", nationality)->required();
  enroll_cmd->add_option("--pin", pin)->required();
  enroll_cmd->add_option("--ca", issuer);
  enroll_cmd->add_option("--fingers", fingers)->check(CLI::Range(1, 10));
  enroll_cmd->add_option("--portrait", portrait_file);

  // card
  CLI::App* card_cmd = sub(&app, "card", "relying-party operations on a card");
  card_cmd->require_subcommand(1);
  std::string card_id, mode, file_path, in_path;
  std::vector<std::string> crl_files;
  bool biometric = false, timestamp = false, off_card = false;
  CLI::App* auth_cmd = sub(card_cmd, "auth", "three-factor authentication");
  auth_cmd->add_option("--card", card_id)->required();
  auth_cmd->add_option("--pin", pin)->required();
  auth_cmd->add_option("--mode", mode)->check(CLI::IsMember({"crl", "ocsp"}));
  auth_cmd->add_option("--crl", crl_files);
  auth_cmd->add_flag("--biometric", biometric);
  CLI::App* sign_cmd = sub(card_cmd, "sign", "sign a file with the card's signature key");
  sign_cmd->add_option("--card", card_id)->required();
  sign_cmd->add_option("--pin", pin)->required();
  sign_cmd->add_option("--file", file_path)->required();
  sign_cmd->add_option("--out", out_path)->required();
  sign_cmd->add_option("--mode", mode)->check(CLI::IsMember({"crl", "ocsp"}));
  sign_cmd->add_option("--crl", crl_files);
  sign_cmd->add_flag("--timestamp", timestamp);
  CLI::App* verify_cmd = sub(card_cmd, "verify", "verify a signed document");
  verify_cmd->add_option("--in", in_path)->required();
  verify_cmd->add_option("--file", file_path);
  verify_cmd->add_option("--mode", mode)->check(CLI::IsMember({"local", "outsourced"}));
  verify_cmd->add_option("--crl", crl_files);
  CLI::App* read_cmd = sub(card_cmd, "read", "read verified public data");
  read_cmd->add_option("--card", card_id)->required();
  CLI::App* match_cmd = sub(card_cmd, "match", "fingerprint match against a fresh capture");
  match_cmd->add_option("--card", card_id)->required();
  match_cmd->add_flag("--off-card", off_card);

  // revoke
  std::uint64_t serial = 0;
  std::string reason = "key_compromise";
  CLI::App* revoke_cmd = sub(&app, "revoke", "revoke a certificate");
  revoke_cmd->add_option("--ca", ca_id)->required();
  revoke_cmd->add_option("--serial", serial)->required();
  revoke_cmd->add_option("--reason", reason);

  // lifecycle
  std::string action, credential_path, new_pin;
  CLI::App* lifecycle_cmd = sub(&app, "lifecycle", "renew, replace, revoke or unlock a card");
  lifecycle_cmd->add_option("--card", card_id)->required();
  lifecycle_cmd->add_option("--action", action)->required()->check(
      CLI::IsMember({"renew", "replace", "revoke", "unlock"}));
  lifecycle_cmd->add_option("--credential", credential_path)->required();
  lifecycle_cmd->add_option("--new-pin", new_pin);

  // crl / pcl
  CLI::App* crl_cmd = sub(&app, "crl", "certificate revocation lists");
  crl_cmd->require_subcommand(1);
  CLI::App* crl_gen = sub(crl_cmd, "gen", "generate a signed CRL");
  crl_gen->add_option("--ca", ca_id)->required();
  crl_gen->add_option("--out", out_path);
  CLI::App* pcl_cmd = sub(&app, "pcl", "positive certification lists");
  pcl_cmd->require_subcommand(1);
  CLI::App* pcl_gen = sub(pcl_cmd, "gen", "generate a signed PCL");
  pcl_gen->add_option("--ca", ca_id)->required();
  pcl_gen->add_option("--out", out_path);

  // serve
  std::string listen;
  CLI::App* serve_cmd = sub(&app, "serve", "run the central services");
  serve_cmd->add_option("--listen", listen, "host:port, default --addr or 127.0.0.1:0");

  // gateway
  std::optional<std::int64_t> until;
  std::string block_mode;
  CLI::App* gateway_cmd = sub(&app, "gateway", "card validation gateway hotlist");
  gateway_cmd->require_subcommand(1);
  CLI::App* gw_block = sub(gateway_cmd, "block", "hotlist a card");
  gw_block->add_option("--card", card_id)->required();
  gw_block->add_option("--mode", block_mode)->required()->check(CLI::IsMember({"temporary", "permanent"}));
  gw_block->add_option("--until", until);
  CLI::App* gw_unblock = sub(gateway_cmd, "unblock", "lift a hotlist entry");
  gw_unblock->add_option("--card", card_id)->required();
  CLI::App* gw_check = sub(gateway_cmd, "check", "gateway decision for a card");
  gw_check->add_option("--card", card_id)->required();

  // tsa
  std::string hash_hex;
  CLI::App* tsa_cmd = sub(&app, "tsa", "time-stamping");
  tsa_cmd->require_subcommand(1);
  CLI::App* tsa_stamp = sub(tsa_cmd, "stamp", "time-stamp a file or hash");
  auto* tsa_file = tsa_stamp->add_option("--file", file_path);
  tsa_stamp->add_option("--hash", hash_hex)->excludes(tsa_file);
  tsa_stamp->add_option("--out", out_path);

  // registry
  bool blacklist = false, forensic = false, no_civil = false;
  CLI::App* registry_cmd = sub(&app, "registry", "civil / forensic / blacklist fixtures");
  registry_cmd->require_subcommand(1);
  CLI::App* registry_set = sub(registry_cmd, "set", "set the registry record of an applicant");
  registry_set->add_option("--applicant", applicant)->required();
  registry_set->add_flag("--blacklist", blacklist);
  registry_set->add_flag("--forensic", forensic);
  registry_set->add_flag("--no-civil", no_civil);

  // audit
  CLI::App* audit_cmd = sub(&app, "audit", "audit log");
  audit_cmd->require_subcommand(1);
  CLI::App* audit_verify = sub(audit_cmd, "verify", "recompute the hash chain");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  auto command_path = [&] {
    std::string path;
    const CLI::App* cur = &app;
    while (true) {
      const auto subs = cur->get_subcommands();
      if (subs.empty()) break;
      cur = subs.front();
      path += (path.empty() ? "" : " ") + cur->get_name();
    }
    return path;
  };

  Context ctx(g, command_path());
  auto policy_for = [](const std::string& id, const std::string& title, std::set<Profile> profiles, int days) {
    return ca::make_policy("pol-" + id, title, std::move(profiles), days);
  };

  try {
    Outcome o;
    if (init_root->parsed()) {
      Authority& a = ctx.authority();
      ca::CaConfig cfg;
      cfg.ca_id = ca_id;
      cfg.validity_days = validity_days > 0 ? validity_days : 7300;
      cfg.policy = policy_for(ca_id, "Root CA", {Profile::ca, Profile::device}, cfg.validity_days);
      const ca::CertificationAuthority& root = a.init_root(cfg);
      o.body = cert_summary(root.ca_certificate);
      a.setup_tsa(ca_id, "tsa-" + ca_id);
      o.body["tsa"] = cert_summary(a.tsa()->certificate());
    } else if (init_pop->parsed()) {
      Authority& a = ctx.authority();
      ca::CaConfig cfg;
      cfg.ca_id = ca_id;
      cfg.validity_days = validity_days > 0 ? validity_days : 3650;
      std::set<Profile> profiles = leaf_profiles();
      profiles.insert(Profile::ca);
      cfg.policy = policy_for(ca_id, "Population CA", profiles, cfg.validity_days);
      o.body = cert_summary(a.init_population(parent_id.empty() ? default_root(a) : parent_id, cfg).ca_certificate);
    } else if (certify_sub->parsed()) {
      Authority& a = ctx.authority();
      const ca::CertificatePolicy policy =
          policy_for(ca_id, "External sub-CA", {Profile::ca, Profile::identity_auth, Profile::signature}, 1825);
      o.body = cert_summary(a.certify_external(parent_id.empty() ? default_root(a) : parent_id, ca_id, policy));
    } else if (provision_sub->parsed()) {
      Authority& a = ctx.authority();
      ca::CaConfig cfg;
      cfg.ca_id = ca_id;
      cfg.validity_days = validity_days > 0 ? validity_days : 1825;
      cfg.policy = policy_for(ca_id, "Virtual sub-CA", {Profile::identity_auth, Profile::signature, Profile::encryption},
                              cfg.validity_days);
      o.body = cert_summary(
          a.provision_virtual(parent_id.empty() ? default_population(a) : parent_id, cfg).ca_certificate);
    } else if (operator_cmd->parsed()) {
      Authority& a = ctx.authority();
      const OperatorCredential cred = a.issue_operator(operator_id);
      cred.save(out_path);
      o.body = cert_summary(cred.certificate);
    } else if (enroll_cmd->parsed()) {
      Authority& a = ctx.authority();
      EnrollmentApplication app_record;
      app_record.applicant_id = applicant;
      app_record.biographic = {{"name", full_name}, {"birth_date", birth_date}, {"nationality", nationality}};
      app_record.portrait_hash =
          sha256(to_bytes(portrait_file.empty() ? "portrait:" + applicant : read_text(portrait_file)));
      for (std::size_t i = 0; i < fingers; ++i) app_record.fingerprints.push_back(card::synthesize_template(a.rng(), 40));
      const RegistryRecord registry = RegistryFixtures::load(a.home() / "registry" / "fixtures").lookup(applicant);
      const EnrollResult r = a.enroll(app_record, registry, issuer.empty() ? default_population(a) : issuer, pin);
      o.body = Json{{"applicant_id", r.application.applicant_id}, {"status", to_string(r.application.status)}};
      if (r.card) {
        Json prints = Json::array();
        for (const card::FingerprintTemplate& t : app_record.fingerprints) prints.push_back(to_hex(t.encode()));
        write_text(capture_path(a, applicant), Json{{"templates", prints}}.dump() + "\n");
        o.body["card_id"] = r.card->card_id;
        Json certs = Json::array();
        for (const Certificate& c : r.certificates) certs.push_back(cert_summary(c));
        o.body["certificates"] = certs;
      } else {
        o.body["rejection_reason"] = r.application.rejection_reason;
        o.exit_code = kExitDomain;
      }
    } else if (auth_cmd->parsed()) {
      Authority& a = ctx.card_authority();
      const toolkit::ValidationMode vm =
          toolkit::validation_mode_from_string(mode.empty() ? "ocsp" : mode);
      if (vm == toolkit::ValidationMode::crl_local) {
        ctx.load_crls(crl_files);
        ctx.complete_crls();
      }
      const std::unique_ptr<card::Card> chip = a.load_card(card_id);
      std::optional<card::FingerprintTemplate> probe;
      if (biometric) probe = live_probe(a, card_id);
      const card::Sam terminal = a.sam();
      const toolkit::AuthResult r = ctx.toolkit().authenticate(*chip, terminal, pin, vm, probe);
      a.save_card(*chip);
      Json factors = Json::array();
      for (toolkit::Factor f : r.factors_passed) factors.push_back(toolkit::to_string(f));
      o.body = Json{{"card_id", card_id},
                    {"outcome", toolkit::to_string(r.outcome)},
                    {"factors", factors},
                    {"verdict", to_string(r.cert_outcome.verdict)},
                    {"transcript", transcript_json(r.transcript)}};
      if (!r.authenticated()) o.exit_code = kExitDomain;
    } else if (sign_cmd->parsed()) {
      Authority& a = ctx.card_authority();
      const toolkit::ValidationMode vm =
          toolkit::validation_mode_from_string(mode.empty() ? "ocsp" : mode);
      if (vm == toolkit::ValidationMode::crl_local) {
        ctx.load_crls(crl_files);
        ctx.complete_crls();
      }
      const std::unique_ptr<card::Card> chip = a.load_card(card_id);
      const card::Sam terminal = a.sam();
      const std::string document = read_text(file_path);
      std::optional<toolkit::SignedDocument> doc;
      try {
        doc = ctx.toolkit().sign(*chip, terminal, pin, to_bytes(document), timestamp, vm);
      } catch (...) {
        a.save_card(*chip);
        throw;
      }
      a.save_card(*chip);
      write_text(out_path, to_hex(doc->encode()) + "\n");
      o.body = Json{{"document_hash", to_hex(doc->document_hash)},
                    {"signer_issuer_id", doc->signer_issuer_id},
                    {"signer_serial", doc->signer_cert_serial},
                    {"signing_time", doc->signing_time}};
      if (doc->timestamp_token) {
        o.body["timestamp_serial"] = doc->timestamp_token->serial;
        o.body["timestamp_time"] = doc->timestamp_token->time;
      }
    } else if (verify_cmd->parsed()) {
      const toolkit::VerifyMode vm = toolkit::verify_mode_from_string(mode.empty() ? "local" : mode);
      const toolkit::SignedDocument doc = toolkit::SignedDocument::decode(from_hex(trimmed(read_text(in_path))));
      toolkit::SignatureVerification v;
      if (!file_path.empty() && sha256(to_bytes(read_text(file_path))) != doc.document_hash) {
        v.outcome = ValidationOutcome{Verdict::bad_signature, ctx.card_authority().now(), RevocationSource::none,
                                      "document does not match the signed hash"};
        v.transcript.push_back({"document", false, v.outcome.detail});
      } else {
        if (vm == toolkit::VerifyMode::local) {
          ctx.load_crls(crl_files);
          ctx.complete_crls();
        }
        v = ctx.toolkit().verify_signature(doc, vm);
      }
      o.body = verification_json(v);
      o.body.erase("checked_at");
      if (doc.timestamp_token) o.body["timestamp_time"] = doc.timestamp_token->time;
      if (v.outcome.verdict != Verdict::valid) o.exit_code = kExitDomain;
    } else if (read_cmd->parsed()) {
      Authority& a = ctx.card_authority();
      const std::unique_ptr<card::Card> chip = a.load_card(card_id);
      const toolkit::IdentityRecord r = ctx.toolkit().read_public_data(*chip);
      o.body = Json{{"card_id", r.card_id}, {"fields", r.fields}};
    } else if (match_cmd->parsed()) {
      Authority& a = ctx.card_authority();
      const std::unique_ptr<card::Card> chip = a.load_card(card_id);
      const card::FingerprintTemplate probe = live_probe(a, card_id);
      const card::Sam terminal = a.sam();
      const toolkit::Toolkit tk = ctx.toolkit();
      const bool matched = off_card ? tk.match_off_card(*chip, terminal, probe) : tk.match_on_card(*chip, terminal, probe);
      a.save_card(*chip);
      o.body = Json{{"card_id", card_id}, {"where", off_card ? "off-card" : "on-card"}, {"decision", matched}};
      if (!matched) o.exit_code = kExitDomain;
    } else if (revoke_cmd->parsed()) {
      const revocation::RevocationReason r = revocation::reason_from_string(reason);
      if (ctx.remote()) {
        WireClient client(g.addr);
        o.body = client.call("revoke", Json{{"ca_id", ca_id}, {"serial", serial}, {"reason", reason}});
        o.body.erase("version");
      } else {
        const ca::RevocationAck ack = ctx.authority().revoke(ca_id, serial, r);
        o.body = Json{{"newly_recorded", ack.newly_recorded},
                      {"reason", revocation::to_string(ack.entry.reason)},
                      {"revoked_at", ack.entry.revoked_at}};
      }
      o.body["ca_id"] = ca_id;
      o.body["serial"] = serial;
    } else if (lifecycle_cmd->parsed()) {
      Authority& a = ctx.authority();
      const OperatorCredential cred = OperatorCredential::load(credential_path);
      const LifecycleResult r = a.lifecycle(card_id, lifecycle_action_from_string(action), cred, new_pin);
      Json issued = Json::array();
      for (const Certificate& c : r.issued) issued.push_back(cert_summary(c));
      o.body = Json{{"card_id", r.card_id},
                    {"action", to_string(r.action)},
                    {"revoked_serials", r.revoked_serials},
                    {"issued", issued}};
      if (r.new_card) o.body["new_card_id"] = r.new_card->card_id;
    } else if (crl_gen->parsed()) {
      const revocation::Crl crl = ctx.remote() ? ctx.services().crl_fetch(ca_id)
                                               : ctx.authority().services().crl_fetch(ca_id);
      if (!out_path.empty()) write_text(out_path, to_hex(crl.encode()) + "\n");
      std::vector<std::uint64_t> serials;
      for (const revocation::CrlEntry& e : crl.entries) serials.push_back(e.serial);
      o.body = Json{{"ca_id", crl.ca_id},
                    {"this_update", crl.this_update},
                    {"next_update", crl.next_update},
                    {"revoked", serials}};
    } else if (pcl_gen->parsed()) {
      const revocation::Pcl pcl = ctx.remote() ? ctx.services().pcl_fetch(ca_id)
                                               : ctx.authority().services().pcl_fetch(ca_id);
      if (!out_path.empty()) write_text(out_path, to_hex(pcl.encode()) + "\n");
      o.body = Json{{"ca_id", pcl.ca_id}, {"as_of", pcl.as_of}, {"valid", pcl.valid_serials}};
    } else if (serve_cmd->parsed()) {
      AuthorityOptions opts;
      opts.home = g.home;
      if (g.now) opts.clock = ManualClock(*g.now).clock();
      opts.seed = g.seed;
      opts.salt = "serve";
      opts.actor = "server";
      std::unique_ptr<Authority> a = Authority::open(std::move(opts));
      const auto [host, port] = parse_address(listen.empty() ? (g.addr.empty() ? "127.0.0.1:0" : g.addr) : listen);
      Server server(*a);
      const std::uint16_t bound = server.bind(host, port);
      out << "listening " << host << ":" << bound << std::endl;
      server.run();
      return kExitOk;
    } else if (gw_block->parsed() || gw_unblock->parsed() || gw_check->parsed()) {
      if (ctx.remote()) {
        WireClient client(g.addr);
        if (gw_block->parsed()) {
          Json body{{"card_id", card_id}, {"mode", block_mode}};
          if (until) body["until"] = *until;
          o.body = client.call("gateway.block", body);
        } else if (gw_unblock->parsed()) {
          o.body = client.call("gateway.unblock", Json{{"card_id", card_id}});
        } else {
          o.body = client.call("gateway.check", Json{{"card_id", card_id}});
        }
        o.body.erase("version");
      } else if (gw_block->parsed()) {
        const revocation::HotlistEntry e =
            ctx.authority().gateway_block(card_id, revocation::block_mode_from_string(block_mode), until);
        o.body = Json{{"mode", to_string(e.block)}, {"since", e.since}};
        if (e.until) o.body["until"] = *e.until;
      } else if (gw_unblock->parsed()) {
        o.body = Json{{"removed", ctx.authority().gateway_unblock(card_id).has_value()}};
      } else {
        o.body = Json{{"decision", to_string(ctx.authority(true).gateway_check(card_id))}};
      }
      o.body["card_id"] = card_id;
      if (gw_check->parsed() && o.body.value("decision", "") != "allowed") o.exit_code = kExitDomain;
    } else if (tsa_stamp->parsed()) {
      Bytes hash;
      if (!file_path.empty()) {
        hash = sha256(to_bytes(read_text(file_path)));
      } else if (!hash_hex.empty()) {
        hash = from_hex(hash_hex);
      } else {
        throw CLI::RequiredError("--file or --hash");
      }
      const revocation::TimestampToken token = ctx.services().tsa_stamp(hash);
      if (!out_path.empty()) write_text(out_path, to_hex(token.encode()) + "\n");
      o.body = Json{{"tsa_id", token.tsa_id},
                    {"serial", token.serial},
                    {"time", token.time},
                    {"document_hash", to_hex(token.document_hash)}};
    } else if (registry_set->parsed()) {
      if (g.home.empty()) throw Error("usage", "no home directory (set --home or EIDPKI_HOME)");
      const fs::path path = fs::path(g.home) / "registry" / "fixtures";
      RegistryFixtures fixtures = RegistryFixtures::load(path);
      RegistryRecord r{applicant, !no_civil, forensic, blacklist};
      fixtures.set(r);
      fixtures.save(path);
      o.body = r.to_json();
    } else if (audit_verify->parsed()) {
      if (g.home.empty()) throw Error("usage", "no home directory (set --home or EIDPKI_HOME)");
      const AuditVerification v = verify_audit_file(fs::path(g.home) / "audit.log");
      o.body = Json{{"ok", v.ok}, {"events", v.events}, {"error", v.error}};
      if (!v.ok) o.exit_code = kExitDomain;
    }
    emit(g, o.body, out);
    return o.exit_code;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == "usage" ? kExitUsage : kExitDomain;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return kExitDomain;
  }
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace eidpki::enrollment
