#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "hpcadvisor/errors.hpp"
#include "hpcadvisor/executor.hpp"

extern char** environ;

namespace hpcadvisor {

namespace {

std::vector<std::string> merged_environment(const std::map<std::string, std::string>& extra) {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    env[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
  }
  for (const auto& [k, v] : extra) env[k] = v;
  std::vector<std::string> out;
  out.reserve(env.size());
  for (const auto& [k, v] : env) out.push_back(k + "=" + v);
  return out;
}

bool valid_env_name(std::string_view name) {
  if (name.empty() || std::isdigit(static_cast<unsigned char>(name[0]))) return false;
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

}  // namespace

ShellResult run_script_function(const std::filesystem::path& script, std::string_view function,
                                const std::filesystem::path& cwd, const std::map<std::string, std::string>& env,
                                const LocalBackendOptions& options) {
  auto extra = env;
  extra["HPCADVISOR_SCRIPT"] = std::filesystem::absolute(script).string();
  const auto env_strings = merged_environment(extra);
  std::vector<char*> envp;
  for (const auto& s : env_strings) envp.push_back(const_cast<char*>(s.c_str()));
  envp.push_back(nullptr);

  const std::string command = fmt::format("source \"$HPCADVISOR_SCRIPT\" || exit 127\n{}", function);
  std::vector<std::string> args = {options.shell, "-c", command};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  const std::string dir = cwd.string();

  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw BackendError(fmt::format("pipe failed: {}", std::strerror(errno)));

  const auto started = std::chrono::steady_clock::now();
  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw BackendError(fmt::format("fork failed: {}", std::strerror(errno)));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    if (::chdir(dir.c_str()) != 0) ::_exit(126);
    ::dup2(fds[1], STDOUT_FILENO);
    ::dup2(fds[1], STDERR_FILENO);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::execve(argv[0], argv.data(), envp.data());
    ::_exit(127);
  }
  ::close(fds[1]);

  ShellResult result;
  const auto deadline = started + options.timeout;
  char buf[4096];
  for (;;) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      result.timed_out = true;
      break;
    }
    pollfd pfd{fds[0], POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
    if (rc < 0 && errno == EINTR) continue;
    if (rc == 0) continue;
    auto n = ::read(fds[0], buf, sizeof buf);
    if (n > 0) {
      result.output.append(buf, static_cast<std::size_t>(n));
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    break;  // EOF
  }
  if (result.timed_out) ::kill(-pid, SIGKILL);
  ::close(fds[0]);

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (result.timed_out)
    result.exit_status = -1;
  else if (WIFEXITED(status))
    result.exit_status = WEXITSTATUS(status);
  else
    result.exit_status = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  return result;
}

std::map<std::string, std::string> task_environment(const TaskSpec& task, const std::filesystem::path& taskrun_dir) {
  std::map<std::string, std::string> env;
  // Application inputs are exported by parameter name (e.g. $BOXFACTOR); the fixed
  // variables below take precedence over a clashing input name.
  for (const auto& [k, v] : task.appinputs)
    if (valid_env_name(k)) env[k] = v;
  env["NNODES"] = std::to_string(task.nnodes);
  env["PPN"] = std::to_string(task.ppn);
  env["SKU"] = task.sku;
  env["VMTYPE"] = task.sku;
  env["HOSTLIST_PPN"] = fmt::format("localhost:{}", task.ppn);
  env["HOSTFILE_PATH"] = (taskrun_dir / "hostfile").string();
  env["TASKRUN_DIR"] = taskrun_dir.string();
  return env;
}

RawRunResult local_execute(const TaskSpec& task, const AppScriptInfo& script, const LocalBackendOptions& options) {
  const auto dir = options.workdir / task.id;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw BackendError(fmt::format("cannot create task dir '{}': {}", dir.string(), ec.message()));
  {
    std::ofstream hostfile(dir / "hostfile");
    if (!hostfile) throw BackendError(fmt::format("cannot write hostfile in '{}'", dir.string()));
    hostfile << "localhost\n";
  }
  auto shell = run_script_function(script.source_path, kRunFunction, dir, task_environment(task, dir), options);
  RawRunResult result;
  result.wallclock_seconds = shell.seconds;
  result.exit_ok = shell.exit_status == 0 && !shell.timed_out;
  result.stdout_text = std::move(shell.output);
  result.advisor_vars = parse_advisor_vars(result.stdout_text);
  return result;
}

LocalBackend::LocalBackend(AppScriptInfo script, LocalBackendOptions options)
    : script_(std::move(script)), options_(std::move(options)) {}

void LocalBackend::create_deployment(const SweepConfig& config) {
  deployment_id_ = "local-" + config.rgprefix;
  std::filesystem::create_directories(options_.workdir);
}

SetupResult LocalBackend::run_setup(const std::string& sku) {
  if (!has_deployment()) throw StateError("local backend has no deployment");
  std::filesystem::create_directories(options_.workdir);
  auto shell = run_script_function(script_.source_path, kSetupFunction, options_.workdir,
                                   {{"SKU", sku}, {"VMTYPE", sku}}, options_);
  setup_sku_ = sku;
  return SetupResult{shell.exit_status == 0 && !shell.timed_out, shell.seconds, std::move(shell.output)};
}

void LocalBackend::resize_pool(const std::string& sku, int nnodes) {
  if (!has_deployment()) throw StateError("local backend has no deployment");
  if (sku != setup_sku_) throw StateError(fmt::format("resize for '{}' before its setup task", sku));
  if (nnodes < 1) throw BackendError("pool size must be positive");
}

RawRunResult LocalBackend::execute(const TaskSpec& task) {
  if (task.sku != setup_sku_) throw StateError(fmt::format("execute for '{}' before its setup task", task.sku));
  return local_execute(task, script_, options_);
}

void LocalBackend::teardown_pool(TeardownMode) {}

void LocalBackend::shutdown_deployment() { deployment_id_.clear(); }

}  // namespace hpcadvisor
