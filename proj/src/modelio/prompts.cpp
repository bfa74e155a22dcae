#include "openswe/modelio.hpp"

namespace openswe::modelio {

namespace {

const std::string kExplorationTemplate = R"PROMPT(You are a context_retrieval_agent responsible for gathering precise and necessary information from the local repository to support environment setup and test execution. After gathering the information, you will generate a concise report summarizing the key findings related to the setup and test execution.

Sometimes, another agent (such as a test analysis agent) may explicitly request specific information to help fix issues like Dockerfile errors or evaluation script failures.

Your primary goal is to:
- If a specific request is provided by a calling agent, focus your retrieval narrowly on that request, extracting only the explicitly required files or data.
- If no explicit request is given, perform a basic and limited exploration of the repository to collect general environment and test execution information. Avoid exhaustive or in-depth searches.
- Pay special attention to:
  - Exact versions of dependencies, libraries, and programming languages (e.g., `flask==2.0.3`, `python3.9`)
  - Commands for setting up the environment and executing tests (e.g., `pip install -r requirements.txt`, `pytest tests/test_api.py`)
  - Environment configuration details (`.env` files, OS package dependencies, etc.)
  - Environment-management frameworks (e.g., poetry, uv) in addition to test frameworks
  - Specific test commands for individual test files, not just generic test execution commands.

High-yield files include README.md, CONTRIBUTING.md, dependency manifests (requirements.txt, pyproject.toml, setup.py), and CI workflows under .github/workflows/.

### Tools

You operate through three repository tools. Issue exactly ONE tool call per turn, as a fenced JSON block:

```json
{"tool": "browse", "path": "<directory relative to repo root>"}
```
```json
{"tool": "search", "pattern": "<substring to match against file paths>"}
```
```json
{"tool": "digest", "path": "<file to read>"}
```

When you have collected enough evidence, emit the final report instead of a tool call:

```json
{"tool": "report",
 "dependency_pins": ["<name==version>", "..."],
 "language_version": "<python version or empty>",
 "setup_commands": ["<command>", "..."],
 "test_commands": ["<command>", "..."],
 "env_framework_notes": "<anything else relevant>"}
```

### Important Notes
- The repository has already been cloned locally; all paths are relative to the repository root.
- You are not expected to search broadly; retrieve only what is needed.
- Avoid redundant or speculative searches. Be goal-driven and cost-efficient.
)PROMPT";

const std::string kDockerfileTemplate = R"PROMPT(Generate a **Dockerfile** based on the collected environment setup information. The Dockerfile must ensure that the provided test files can be executed correctly.

### Requirements
1. **Copy the repository** inside the Docker container into `/testbed/` and set `WORKDIR` to `/testbed/`.
2. **Set up the environment** based on the information from the context retrieval agent:
   - Install necessary system dependencies.
   - Install all necessary libraries and dependencies.
3. **Ensure test execution** by setting up all necessary configurations.

### Important Notes
1. You are FORBIDDEN to run tests in the dockerfile; tests will be run using the eval script. Do not include commands like `npm test`, `pytest`, or `mvn test` in the Dockerfile.
2. Prioritize package managers (APT, pip) to set up the environment efficiently.
3. Ensure shell compatibility by using `/bin/bash` as the default shell environment.
4. Instead of a generic Ubuntu/Debian image, you MUST directly use the provided `openswe-python-{python_version}` base image to set up the python environment. It provides conda on debian, a python env named `testbed` with the given version, and configured package mirrors.
   - Available python versions include 2.7 and 3.5 to 3.14. Choose the **best fit version** rather than the minimal one.
   - If a different base image is really necessary, add the marker comment `# openswe: base-image-override` on its own line.
   - All python/pip related RUN commands must run with `bash -lc` or `. /opt/conda/etc/profile.d/conda.sh && conda activate testbed`.
   - If you are rewriting because of a python version issue, you MUST NOT create a new conda env; instead change the base image version.
5. Use `COPY` to copy local files into the container; avoid network operations where possible.
6. Do not use ENTRYPOINT.
7. Install the repository itself in development mode (`pip install -e .`) rather than installing a pre-built package of it from a registry, so the local code is what tests exercise.

### Example Format
The Dockerfile must be wrapped in <dockerfile> tags. Example:

<dockerfile>
# Base image specification (Required)
FROM openswe-python-{python_version}
# Fetch source code; the checkout is provided in the build context
COPY repo /testbed
# set default workdir to testbed (Required)
WORKDIR /testbed/
# The lines above should NEVER change (except python version), so layers are reused.

ENV DEBIAN_FRONTEND=noninteractive
RUN apt install -qq -y g++
RUN bash -lc 'pip install -r requirements.txt'
RUN bash -lc 'pip install -e .'
RUN bash -lc 'pip install pytest'
</dockerfile>
)PROMPT";

const std::string kEvalScriptTemplate = R"PROMPT(Generate an **evaluation script** based on the collected environment setup and test execution information. The script must execute the provided test files inside the specified Docker environment.

### Requirements
1. **Activate the environment**: ensure the correct environment (e.g., conda `testbed`) is activated before running the tests.
2. **Apply the patch**: the test patch must be applied before running the tests.
3. **Execute only the specified target test files**, using the correct command found by the context retrieval agent. Do not run the whole test suite.

### Important Notes
1. Execute only the target tests fixed by the gold patch, plus a few already-passing neighbors; running all tests is time-consuming and unnecessary.
2. Combine multiple test commands into a single command whenever possible.
3. The test command must output the names and pass/fail/skip status of each executed test file. Keep the output concise but do not suppress key test execution details.
4. The actual test patch content is omitted and marked with the [CONTENT OF TEST PATCH] placeholder. You must generate the complete git apply command structure, including the heredoc syntax with delimiter (EOF_114329324912). The placeholder will be programmatically replaced with the actual patch content before execution.
5. You MUST capture the exit code immediately after running the tests using `rc=$?`, and then echo: `OPENSWE_EXIT_CODE=$rc`. You MUST NOT include `set -e`, which would truncate the exit code.
6. You MUST print ">>>>> Start Test Output" exactly before the test command and ">>>>> End Test Output" after it; output is extracted between these markers.

### Example Format
The script must be wrapped in <script> tags. Example:

<script>
#!/bin/bash
# activate environment
. /opt/conda/etc/profile.d/conda.sh
conda activate testbed # already created by base image
cd /testbed

# Required: apply test patch to update target tests
git apply -v --allow-empty - <<'EOF_114329324912'
[CONTENT OF TEST PATCH]
EOF_114329324912

# Required: run target test files instead of all tests!
echo ">>>>> Start Test Output"
pytest --no-header -rA --tb=no -p no:cacheprovider tests/test_target.py
rc=$? # Required, save exit code
echo ">>>>> End Test Output"
echo "OPENSWE_EXIT_CODE=$rc" # Required, echo test status
</script>
)PROMPT";

const std::string kAnalysisTemplate = R"PROMPT(Given the test log and the target tests, analyze the results and determine the next steps. If the dockerfile did not build successfully, analyze what issues happened.

### Step 1: Verify Test Execution
- Identify which test files were added or modified by the eval script.
- Confirm that those tests were actually executed (they appear in the test log).
- Check the return codes: the return code for testOnly MUST BE non-0 and for testWithFix MUST BE 0.
- If all tests switch from fail to pass, report success. If there exists fail-to-fail or pass-to-fail, report fail (must be fixed by the eval script agent).
- If no test output is found, set is_finish = false and instruct the eval script agent to revise the script so tests actually run.
- On passing results, verify the success is genuine: the evaluation script must not contain hardcoded exit codes or other shortcuts that bypass real test execution.

### Step 2: Identify Problems
- Determine whether a failure comes from the Dockerfile (wrong dependencies, missing configuration) or the evaluation script (wrong test command, paths, missing environment activation).
- Ignore conda/pip update warnings unless they are the root cause.
- If information from the repository is missing, consider additional context retrieval.
- The eval script MUST capture the exit code after tests and echo "OPENSWE_EXIT_CODE=$rc".

### Step 3: Plan Corrective Actions
- Dockerfile fix needed: provide guidance to write_dockerfile_agent, including the original error message.
- Evaluation script fix needed: provide guidance to write_eval_script_agent, including the original error message.
- More repository information needed: provide guidance to context_retrieval_agent, specifying exactly which files to look at.
- Always add guidance to at least one of dockerfile agent or eval script agent if you guide the context retrieval agent; otherwise nothing is rewritten and the error will replay.
- If you encounter a transient network issue, put all guidance empty and set is_finish to false; the sample will be rerun.
- If the issue is unsolvable (the gold patch solves no unit test, unsolvable dependency conflicts, dependencies that no longer exist), set "unsolvable" to true.

### Output Example
Provide your answer in JSON format:

```json
{
  "is_finish": false,
  "unsolvable": false,
  "guidance_for_write_dockerfile_agent": "",
  "guidance_for_write_eval_script_agent": "",
  "guidance_for_context_retrieval_agent": ""
}
```

If `is_finish` is true, all guidance fields can be empty. For any agent not called, its guidance field must be empty. Calling context_retrieval_agent is expensive; only suggest it when clearly necessary, and be precise about what to retrieve.
)PROMPT";

}  // namespace

const std::string& prompt_template(const std::string& template_id) {
  if (template_id == kTemplateExploration) return kExplorationTemplate;
  if (template_id == kTemplateDockerfileInit) return kDockerfileTemplate;
  if (template_id == kTemplateEvalScriptInit) return kEvalScriptTemplate;
  if (template_id == kTemplateAnalysis) return kAnalysisTemplate;
  throw Error("unknown prompt template: " + template_id);
}

}  // namespace openswe::modelio
