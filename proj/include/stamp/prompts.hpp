#pragma once

// Fixed prompt texts used across the pipeline. These are frozen assets: tests
// pin their content, so edit with care.

namespace stamp::prompts {

inline constexpr const char* kSystemPrompt = R"(# Tools

You may call one or more functions to assist with the user query.

You are provided with function signatures within <tools></tools> XML tags:
<tools>
{"type": "function", "function": {"name_for_human": "mobile_use", "name": "mobile_use", "description": "Use a touchscreen to interact with a mobile device, and take screenshots.
* This is an interface to a mobile device with touchscreen. You can perform actions like clicking, typing, swiping, etc.
* Some applications may take time to start or process actions, so you may need to wait and take successive screenshots to see the results of your actions.
* The screen's resolution is 1000x1000.
* Make sure to click any buttons, links, icons, etc with the cursor tip in the center of the element. Don't click boxes on their edges unless asked.", "parameters": {"properties": {"action": {"description": "The action to perform. The available actions are:
* `key`: Perform a key event on the mobile device.
    - This supports adb's `keyevent` syntax.
    - Examples: \"volume_up\", \"volume_down\", \"power\", \"camera\", \"clear\".
* `click`: Click the point on the screen with coordinate (x, y).
* `long_press`: Press the point on the screen with coordinate (x, y) for specified seconds.
* `swipe`: Swipe from the starting point with coordinate (x, y) to the end point with coordinates2 (x2, y2).
* `type`: Input the specified text into the activated input box.
* `system_button`: Press the system button.
* `open`: Open an app on the device.
* `wait`: Wait specified seconds for the change to happen.
* `answer`: Terminate the current task and output the answer.
* `interact`: Resolve the blocking window by interacting with the user.
* `terminate`: Terminate the current task and report its completion status.", "enum": ["key", "click", "long_press", "swipe", "type", "system_button", "open", "wait", "answer", "interact", "terminate"], "type": "string"},
"coordinate": {"description": "(x, y): The x (pixels from the left edge) and y (pixels from the top edge) coordinates to move the mouse to. Required only by `action=click`, `action=long_press`, and `action=swipe`.", "type": "array"},
"coordinate2": {"description": "(x, y): The x (pixels from the left edge) and y (pixels from the top edge) coordinates to move the mouse to. Required only by `action=swipe`.", "type": "array"},
"text": {"description": "Required only by `action=key`, `action=type`, `action=open`, `action=answer`, and `action=interact`.", "type": "string"},
"time": {"description": "The seconds to wait. Required only by `action=long_press` and `action=wait`.", "type": "number"},
"button": {"description": "Back means returning to the previous interface, Home means returning to the desktop, Menu means opening the application background menu, and Enter means pressing the enter. Required only by `action=system_button`", "enum": ["Back", "Home", "Menu", "Enter"], "type": "string"},
"status": {"description": "The status of the task. Required only by `action=terminate`.", "type": "string", "enum": ["success", "failure"]}},
"required": ["action"], "type": "object"}, "args_format": "Format the arguments as a JSON object."}}
</tools>

For each function call, return a json object with function name and arguments within <tool_call></tool_call> XML tags:
<tool_call>
{"name": <function-name>, "arguments": <args-json-object>}
</tool_call>

# Response format

Response format for every step:
1) Action: a short imperative describing what to do in the UI.
2) Memory: the key information need to memory in the screenshot.
3) A single <tool_call>...</tool_call> block containing only the JSON: {"name": <function-name>, "arguments": <args-json-object>}.

Rules:
- Output exactly in the order: Action, Memory, <tool_call>.
- Be brief: one for Action.
- Do not output anything else outside those three parts.
- If finishing, use action=terminate in the tool call.
)";

// Placeholders {goal} and {history_string} are substituted verbatim.
inline constexpr const char* kUserPromptTemplate =
    R"(Please generate the next move according to the UI screenshot, instruction and previous actions.

Instruction: {goal}

Previous actions:
{history_string})";

// Placeholder {next_planning} is substituted with the planner's proposal.
inline constexpr const char* kWorkerPrompt =
    R"(You are an expert in mobile phone operations. I will provide you with a mobile screenshot and an operation task, and you need to output the exact action to perform.

Mobile screenshot: shown in the image below
Operation task: {next_planning}

Your action space is as follows. You must choose one of the following actions and output it in the required format:
- click (x, y): click the position whose coordinates are (x, y), where both x and y are relative coordinates in the range 0-1000
- type (x, y, text): first click the position whose coordinates are (x, y), then input text, where text is the content to type
- scroll: scroll the screen downward a bit to view more content that is not currently visible below

Your output format should follow the examples below:
click (500, 500)
type (100, 100, hello)
scroll

Note: Please do not attempt to manipulate elements at the very top of the page (the browser's fixed tag bar, y<=120). All your actions should be concentrated in the webpage content area.

Do not output anything other than the formats above. You may output only one action at a time. Note that type (x, y, text) represents two actions: first clicking (x, y), then typing text.)";

// Placeholders {task}, {guideline}, {calculation}, {answer}.
inline constexpr const char* kPlannerPrompt =
    R"(I have a mobile operation task:
{task}

The detailed task guideline is:
{guideline}

The calculation part may be difficult, so I am directly giving you some hints:
{calculation}

The final answer to input is:
{answer}

Now the phone has entered the home page of the task app, as shown in the image below.

Please output exactly one next action. You may choose one of the following four actions:
Click - Please describe the element to click from the perspectives of position, shape, function, or other visual characteristics.
Input - Please describe the element to type into, and also provide the text content to input. This action will first click the target element to activate the input box and then type the text.
Scroll - If you need to scroll down to see more content below, use this action. No extra description is needed.
End - If you have entered the correct answer and seen "Success!", you may use this action to stop. No extra description is needed.

Please use the following JSON format in your reply:
```json
{{"think": "Your detailed reasoning about what to do next, based on the action history, past and current state, task requirement, guideline, and other relevant information", "action": "The next action. Please output it strictly according to the format and requirements above"}}
```

Please note:
1. Follow the task guideline strictly. Do not perform exploratory actions based on your own assumptions.
2. The input action already includes one click, so you do not need to click the input box separately before inputting.
3. If a popup appears, try closing it first.
4. Do not try to input the final answer directly. You must first browse all information according to the detailed guideline, and only then input the answer.
5. Before entering the final answer, you must review the action history and screenshots to ensure that all required information for the task has already appeared.)";

// Placeholders {task}, {reference}, {memorized}; verdicts parsed exactly.
inline constexpr const char* kMemoryAccJudgePrompt =
    R"(I have a task to perform using Chrome on my phone, as follows:
{task}
Please note that this task requires memorizing specific information to complete.

I will now provide the content that needs to be memorized for this task, as follows:
{reference}

I have a mobile AI agent that has completed this task, and it has memorized the following:
{memorized}

Now, please determine whether the information the mobile phone agent has memorized is accurate based on the information above:
1. If the mobile phone agent's memory completely matches the provided content to be memorized, output "Complete Match".
2. If the mobile phone agent's memory partially matches the provided content to be memorized, output "Partial Match".
3. If the mobile phone agent's memory does not match the provided content to be memorized at all, output "No Match".

"Match" means that both expressions convey the same meaning. They do not need to be completely identical. As long as the core content to be memorized, such as numbers or strings, is the same, it is acceptable.

Now, after careful consideration, please directly output your final judgment. You must choose one of "Complete Match", "Partial Match", or "No Match" and do not output any other content.)";

}  // namespace stamp::prompts
