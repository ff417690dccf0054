#include "tir/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <vector>

#include <fmt/format.h>

#include "tir/error.hpp"

namespace tir {

namespace {

constexpr int kViolationExit = 86;
constexpr int kMemoryExit = 87;

// Runs inside the child interpreter. Reads the user script from stdin, writes
// the `result` variable as JSON to fd 3.
constexpr const char* kPrelude = R"PY(
import sys, os, json, builtins, traceback
_code = sys.stdin.read()
_result_out = os.fdopen(3, 'w', encoding='utf-8')
_ALLOWED = tuple(sorted({os.path.realpath(p) for p in sys.path if p and os.path.isdir(p)}))
_DENY = ('socket.', 'subprocess.', 'os.system', 'os.exec', 'os.posix_spawn', 'os.spawn', 'os.fork',
         'os.forkpty', 'os.kill', 'os.killpg', 'os.remove', 'os.unlink', 'os.rename', 'os.replace',
         'os.rmdir', 'os.mkdir', 'os.chmod', 'os.chown', 'os.link', 'os.symlink', 'os.truncate',
         'os.utime', 'os.chdir', 'os.chroot', 'os.setxattr', 'os.removexattr', 'os.putenv',
         'os.unsetenv', 'shutil.', 'pty.', 'ctypes.', 'sys.addaudithook', 'resource.setrlimit',
         'resource.prlimit', 'urllib.Request', 'http.client.', 'ftplib.', 'smtplib.', 'telnetlib.',
         'webbrowser.', 'imaplib.', 'poplib.', 'nntplib.', 'os.startfile', 'winreg.', 'msvcrt.')
_WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_TRUNC | os.O_APPEND

def _violation(event, args):
    try:
        sys.stdout.flush()
    except BaseException:
        pass
    os.write(2, ('SandboxViolation: blocked %s %r\n' % (event, args))[:4000].encode('utf-8', 'replace'))
    os._exit(86)

def _inside(path):
    try:
        p = os.fsdecode(os.fspath(path))
    except BaseException:
        return False
    if not os.path.isabs(p):
        return False
    rp = os.path.realpath(p)
    return any(rp == a or rp.startswith(a + os.sep) for a in _ALLOWED)

def _hook(event, args):
    if event == 'open':
        path, mode, flags = (tuple(args) + (None, None, None))[:3]
        if isinstance(path, int):
            if path > 2:
                _violation(event, args)
            return
        writing = (isinstance(mode, str) and any(c in mode for c in 'wax+')) or \
                  (isinstance(flags, int) and flags & _WRITE_FLAGS)
        if writing or not _inside(path):
            _violation(event, args)
        return
    if event in ('os.listdir', 'os.scandir'):
        if not args or not _inside(args[0]):
            _violation(event, args)
        return
    if event.startswith(_DENY):
        _violation(event, args)

_ns = {'__name__': '__main__', '__builtins__': builtins}
_status = 0
sys.addaudithook(_hook)
try:
    exec(compile(_code, '<sandbox>', 'exec'), _ns)
except MemoryError:
    try:
        sys.stdout.flush()
    except BaseException:
        pass
    os.write(2, b'SandboxViolation: memory limit exceeded\n')
    os._exit(87)
except SystemExit as e:
    _status = e.code if isinstance(e.code, int) else (0 if e.code is None else 1)
except BaseException:
    traceback.print_exc()
    _status = 1
if 'result' in _ns:
    try:
        _payload = json.dumps(_ns['result'], allow_nan=False, ensure_ascii=False)
    except BaseException:
        _payload = json.dumps(repr(_ns['result']), ensure_ascii=False)
    _result_out.write(_payload)
_result_out.flush()
try:
    sys.stdout.flush()
    sys.stderr.flush()
except BaseException:
    pass
os._exit(_status)
)PY";

std::string resolve_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) return name;
  const char* path_env = std::getenv("PATH");
  const std::string path = path_env != nullptr ? path_env : "/usr/local/bin:/usr/bin:/bin";
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t end = path.find(':', start);
    const std::string dir = path.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!dir.empty()) {
      const std::string candidate = dir + "/" + name;
      if (::access(candidate.c_str(), X_OK) == 0) return candidate;
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return {};
}

struct Pipe {
  int read = -1;
  int write = -1;
};

Pipe make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(ErrorCode::LaunchFailure, std::strerror(errno));
  return {fds[0], fds[1]};
}

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

class ScratchDir {
 public:
  ScratchDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "tir-sandbox-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw Error(ErrorCode::LaunchFailure, "mkdtemp failed");
    path_ = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace

Json SandboxOutput::to_json() const {
  return Json{{"stdout", stdout_text}, {"stderr", stderr_text}, {"result", result}};
}

SandboxOutput run_python_sandboxed(const std::string& code, const SandboxLimits& limits) {
  const std::string python = resolve_executable(limits.python);
  if (python.empty()) throw Error(ErrorCode::LaunchFailure, "interpreter not found: " + limits.python);
  ScratchDir scratch;

  Pipe in = make_pipe(), out = make_pipe(), err = make_pipe(), res = make_pipe(), exec_err = make_pipe();

  // Everything the child touches is prepared before fork().
  std::vector<std::string> args = {python, "-I", "-X", "utf8", "-c", kPrelude};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  char* envp[] = {nullptr};
  const rlim_t mem = static_cast<rlim_t>(limits.memory_bytes);
  const rlim_t cpu = static_cast<rlim_t>(limits.wall_clock.count() / 1000 + 2);
  const char* cwd = scratch.path().c_str();

  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::LaunchFailure, std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    if (limits.isolate_network) ::unshare(CLONE_NEWNET);
    const rlimit as{mem, mem};
    const rlimit cpu_lim{cpu, cpu};
    const rlimit zero{0, 0};
    ::setrlimit(RLIMIT_AS, &as);
    ::setrlimit(RLIMIT_CPU, &cpu_lim);
    ::setrlimit(RLIMIT_FSIZE, &zero);
    ::setrlimit(RLIMIT_CORE, &zero);
    if (::chdir(cwd) != 0) ::_exit(127);
    ::dup2(in.read, 0);
    ::dup2(out.write, 1);
    ::dup2(err.write, 2);
    ::dup2(res.write, 3);
    ::execve(argv[0], argv.data(), envp);
    const int e = errno;
    [[maybe_unused]] auto n = ::write(exec_err.write, &e, sizeof(e));
    ::_exit(127);
  }

  close_fd(in.read);
  close_fd(out.write);
  close_fd(err.write);
  close_fd(res.write);
  close_fd(exec_err.write);
  ::fcntl(in.write, F_SETFL, O_NONBLOCK);

  int launch_errno = 0;
  if (::read(exec_err.read, &launch_errno, sizeof(launch_errno)) == sizeof(launch_errno)) {
    close_fd(exec_err.read);
    ::waitpid(pid, nullptr, 0);
    close_fd(in.write);
    close_fd(out.read);
    close_fd(err.read);
    close_fd(res.read);
    throw Error(ErrorCode::LaunchFailure, fmt::format("execve {}: {}", python, std::strerror(launch_errno)));
  }
  close_fd(exec_err.read);

  SandboxOutput output;
  std::string result_text;
  std::size_t written = 0;
  const auto deadline = std::chrono::steady_clock::now() + limits.wall_clock;
  bool timed_out = false;
  std::array<char, 8192> buf{};

  while (out.read >= 0 || err.read >= 0 || res.read >= 0) {
    std::vector<pollfd> fds;
    if (in.write >= 0) fds.push_back({in.write, POLLOUT, 0});
    if (out.read >= 0) fds.push_back({out.read, POLLIN, 0});
    if (err.read >= 0) fds.push_back({err.read, POLLIN, 0});
    if (res.read >= 0) fds.push_back({res.read, POLLIN, 0});
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      timed_out = true;
      break;
    }
    const int ready = ::poll(fds.data(), fds.size(), static_cast<int>(std::min<long>(remaining.count(), 100)));
    if (ready < 0 && errno != EINTR) break;
    for (const pollfd& p : fds) {
      if (p.revents == 0) continue;
      if (p.fd == in.write) {
        const ssize_t n = ::write(in.write, code.data() + written, code.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN) written = code.size();
        if (written >= code.size()) close_fd(in.write);
        continue;
      }
      const ssize_t n = ::read(p.fd, buf.data(), buf.size());
      if (n <= 0) {
        if (n < 0 && (errno == EAGAIN || errno == EINTR)) continue;
        if (p.fd == out.read) close_fd(out.read);
        else if (p.fd == err.read) close_fd(err.read);
        else close_fd(res.read);
        continue;
      }
      std::string& sink = p.fd == out.read ? output.stdout_text : p.fd == err.read ? output.stderr_text : result_text;
      const std::size_t cap = p.fd == res.read ? limits.output_cap * 4 : limits.output_cap;
      const std::size_t room = sink.size() < cap ? cap - sink.size() : 0;
      sink.append(buf.data(), std::min<std::size_t>(room, static_cast<std::size_t>(n)));
    }
    if (in.write >= 0 && written >= code.size()) close_fd(in.write);
  }

  if (timed_out) ::kill(-pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  // Reap stragglers in the child's process group.
  ::kill(-pid, SIGKILL);
  close_fd(in.write);
  close_fd(out.read);
  close_fd(err.read);
  close_fd(res.read);

  if (timed_out) {
    throw Error(ErrorCode::SandboxTimeout, fmt::format("script exceeded {} ms", limits.wall_clock.count()));
  }
  if (WIFSIGNALED(status)) {
    const int sig = WTERMSIG(status);
    if (sig == SIGXCPU) throw Error(ErrorCode::SandboxTimeout, "script exceeded its CPU budget");
    throw Error(ErrorCode::SandboxViolation,
                fmt::format("script terminated by signal {} (resource limit); stderr: {}", sig, output.stderr_text));
  }
  output.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (output.exit_code == kViolationExit || output.exit_code == kMemoryExit) {
    std::string diag = output.stderr_text;
    while (!diag.empty() && (diag.back() == '\n' || diag.back() == ' ')) diag.pop_back();
    throw Error(ErrorCode::SandboxViolation, diag.empty() ? "denied operation" : diag);
  }
  if (!result_text.empty()) {
    try {
      output.result = Json::parse(result_text);
    } catch (const Json::exception&) {
      output.result = result_text;
    }
  }
  return output;
}

}  // namespace tir
