"""Canonical step templates for the assistant's task flows.

The SOS flows are fixed sequences: same wording every time, with only the
user, location, and ambulance details substituted. Booking flows share
their question and notification templates between the live rule-driven
policy and the dataset factory so both speak identical text.
"""

from __future__ import annotations

from dataclasses import dataclass

from .trajectory import END_ACTION

MONTHS = ("January", "February", "March", "April", "May", "June", "July",
          "August", "September", "October", "November", "December")


def ordinal(n: int) -> str:
    if 11 <= n % 100 <= 13:
        return f"{n}th"
    return f"{n}{ {1: 'st', 2: 'nd', 3: 'rd'}.get(n % 10, 'th') }"


def human_date(iso_date: str) -> str:
    """2024-11-30 -> November 30th"""
    year, month, day = iso_date.split("-")
    return f"{MONTHS[int(month) - 1]} {ordinal(int(day))}"


def human_time(slot_time: str) -> str:
    """11:00 or 11:00-11:30 -> 11:00 AM; 14:30 -> 2:30 PM"""
    start = slot_time.split("-")[0]
    hour, minute = map(int, start.split(":"))
    meridiem = "AM" if hour < 12 else "PM"
    display = hour % 12 or 12
    return f"{display}:{minute:02d} {meridiem}"


def appointment_stamp(slot: dict) -> str:
    """{date: 2024-11-30, time: 11:00-11:30} -> 11:00-11:30, 30/11/2024"""
    year, month, day = slot["date"].split("-")
    return f"{slot['time']}, {day}/{month}/{year}"


def format_location(location: dict) -> str:
    """{latitude: 23.5326, longitude: 139.7524} rendered without quotes."""
    inner = ", ".join(f"{k}: {v!r}" if isinstance(v, str) else f"{k}: {v}"
                      for k, v in location.items())
    return "{" + inner + "}"


@dataclass(frozen=True)
class FlowStep:
    """One planner decision and, unless terminal, the call that enacts it."""

    reason: str
    action: str
    tool: str | None = None
    parameters: dict | None = None

    @property
    def terminal(self) -> bool:
        return self.action == END_ACTION


# -- soft SOS ----------------------------------------------------------------

SOFT_SOS_PLANNER = (
    ("User has triggered a soft SOS, so the system needs to notify the user "
     "about abnormal vitals",
     "Call notify_user to inform the user that the SOS process is being triggered."),
    ("The user has been informed about the abnormal vitals. The Soft SOS "
     "process is completed successfully.",
     END_ACTION),
)


def soft_sos_sequence(user_id: str, alert_text: str) -> list[FlowStep]:
    (r1, a1), (r2, a2) = SOFT_SOS_PLANNER
    return [
        FlowStep(r1, a1, "notify_user", {"user_id": user_id, "symptoms": alert_text}),
        FlowStep(r2, a2),
    ]


# -- hard SOS start ------------------------------------------------------------

HARD_SOS_START_PLANNER = (
    ("User has triggered a hard SOS, so the system needs to notify the user "
     "that the SOS process is starting.",
     "Call notify_user to inform the user that the SOS process is being triggered."),
    ("The user has been notified about the SOS initiation. The system now "
     "needs to retrieve the user's location to proceed with the emergency response.",
     "Call get_location to fetch the user's current coordinates."),
    ("The user's current location has been retrieved. Next, the system needs "
     "to find the nearest ambulance based on this location.",
     "Call search_ambulance with the location to find the nearest available ambulance."),
    ("The nearest ambulance has been identified. The system needs to notify "
     "the ambulance about the user's location and details.",
     "Call send_message to notify the ambulance with the user's location and details."),
    ("The ambulance has been notified. Next, the system needs to alert the "
     "user's emergency contacts about the SOS.",
     "Call send_message to notify emergency contacts about the SOS and user's location."),
    ("The emergency contacts have been notified. The system now needs to "
     "inform the user about the actions taken, including ambulance and "
     "emergency contact notifications.",
     "Call notify_user to inform the user about the completion of the SOS process."),
    ("The user has been informed about the actions taken. The SOS process is "
     "completed successfully.",
     END_ACTION),
)

HARD_SOS_START_NOTICE = ("Hard SOS triggered. We are initiating emergency "
                         "response procedures.")


def ambulance_dispatch_text(location: dict, user_id: str, name: str) -> str:
    return (f"Ambulance needed at location {format_location(location)} "
            f"by user {user_id} - {name}")


def contacts_alert_text(name: str, location: dict) -> str:
    return f"SOS triggered by {name} at location {format_location(location)}"


def sos_started_notice(ambulance_id: str, user_id: str) -> str:
    return (f"Ambulance ({ambulance_id}) with contact {user_id} has been "
            "informed and is on its way. Your emergency contacts have also "
            "been notified.")


def hard_sos_start_sequence(user_id: str, name: str, location: dict,
                            ambulance: dict) -> list[FlowStep]:
    steps = HARD_SOS_START_PLANNER
    return [
        FlowStep(*steps[0], "notify_user",
                 {"user_id": user_id, "symptoms": HARD_SOS_START_NOTICE}),
        FlowStep(*steps[1], "get_location", {}),
        FlowStep(*steps[2], "search_ambulance", {"location": dict(location)}),
        FlowStep(*steps[3], "send_message",
                 {"phone_no": ambulance["phone_no"],
                  "text": ambulance_dispatch_text(location, user_id, name)}),
        FlowStep(*steps[4], "send_message",
                 {"text": contacts_alert_text(name, location),
                  "to_emergency_contacts": True}),
        FlowStep(*steps[5], "notify_user",
                 {"user_id": user_id,
                  "symptoms": sos_started_notice(ambulance["ambulance_id"], user_id)}),
        FlowStep(*steps[6]),
    ]


# -- hard SOS end ---------------------------------------------------------------

HARD_SOS_END_PLANNER = (
    ("User has triggered an End SOS. The system needs to notify the user "
     "that the End SOS process is being initiated.",
     "Call notify_user to inform the user about the initiation of the End SOS process."),
    ("The user has been informed about the initiation of the End SOS process. "
     "The system now needs to get the assigned ambulance details.",
     "Call get_assigned_ambulance to retrieve the ambulance details."),
    ("The assigned ambulance details have been retrieved. The system now "
     "needs to notify the ambulance about the SOS being ended.",
     "Call send_message to inform the ambulance about the End SOS."),
    ("The ambulance has been notified about the End SOS. Next, the system "
     "needs to notify the user's emergency contacts about the resolution.",
     "Call send_message to inform emergency contacts about the SOS resolution."),
    ("The emergency contacts have been notified about the SOS resolution. "
     "The system now needs to inform the user that the End SOS process is completed.",
     "Call notify_user to inform the user about the successful completion of "
     "the End SOS process."),
    ("The user has been informed about the successful completion of the End "
     "SOS process. The task is completed.",
     END_ACTION),
)

HARD_SOS_END_NOTICE = "End SOS triggered. We are notifying all relevant parties."
SOS_ENDED_NOTICE = ("The SOS process has been successfully ended. Ambulance "
                    "and emergency contacts have been informed.")


def ambulance_release_text(user_id: str, name: str) -> str:
    return (f"The SOS triggered by user {user_id} - {name} has been resolved. "
            "Ambulance services are no longer required.")


def contacts_resolved_text(name: str) -> str:
    return (f"The SOS triggered by {name} has been resolved. No further "
            "assistance is required.")


def hard_sos_end_sequence(user_id: str, name: str,
                          ambulance: dict) -> list[FlowStep]:
    steps = HARD_SOS_END_PLANNER
    return [
        FlowStep(*steps[0], "notify_user",
                 {"user_id": user_id, "symptoms": HARD_SOS_END_NOTICE}),
        FlowStep(*steps[1], "get_assigned_ambulance", {"user_id": user_id}),
        FlowStep(*steps[2], "send_message",
                 {"phone_no": ambulance["phone_no"],
                  "text": ambulance_release_text(user_id, name)}),
        FlowStep(*steps[3], "send_message",
                 {"text": contacts_resolved_text(name),
                  "to_emergency_contacts": True}),
        FlowStep(*steps[4], "notify_user",
                 {"user_id": user_id, "symptoms": SOS_ENDED_NOTICE}),
        FlowStep(*steps[5]),
    ]


# -- booking -----------------------------------------------------------------

def offer_question(specialist_name: str, slot: dict) -> str:
    return (f"{specialist_name} has an opening at {human_time(slot['time'])} "
            f"on {human_date(slot['date'])}. Would you like to schedule an "
            "appointment?")


def booking_confirmed_text(specialist_name: str, slot: dict) -> str:
    return (f"Your appointment with {specialist_name} is confirmed for "
            f"{human_time(slot['time'])} on {human_date(slot['date'])}. "
            "Your symptoms have been recorded for future reference.")


BOOKING_DECLINED_TEXT = ("Your symptoms have been recorded for future "
                         "reference. Please don't hesitate to reach out if "
                         "you decide to see a doctor.")

ACCEPT_REPLY = "Yes, please"
DECLINE_REPLY = "No, not at this time."


def is_acceptance(reply) -> bool:
    if isinstance(reply, dict):
        reply = reply.get("user", "")
    return str(reply).strip().lower().startswith("yes")


RETRIEVE_ACTION = ("Check for past similar complaints using the "
                   "retrieve_past_complaints tool.")


def retrieve_step(user_id: str, symptoms: str, reason: str) -> FlowStep:
    return FlowStep(reason, RETRIEVE_ACTION, "retrieve_past_complaints",
                    {"user_id": user_id, "symptoms": symptoms})


def search_action(specialization: str) -> str:
    return (f"Use the get_available_specialists tool to find a "
            f"{specialization} available for an appointment.")


def search_reason(lead: str, specialization: str) -> str:
    return f"{lead} A consultation with a {specialization} is advisable."


def search_step(symptoms: str, specialization: str, reason: str) -> FlowStep:
    return FlowStep(reason, search_action(specialization),
                    "get_available_specialists",
                    {"symptoms": symptoms, "specialization": specialization})


def offer_reason(specialist_name: str) -> str:
    return f"{specialist_name} is available on the user's preferred date and time."


def offer_action(specialist_name: str, slot: dict, declined: bool = False) -> str:
    lead = ("Suggest the appointment to the user and check if they want to "
            "schedule it." if declined else
            "Suggest the appointment to the user and proceed with booking "
            "if confirmed.")
    return f"{lead} {specialist_name} on {slot['date']} between {slot['time']}"


def offer_step(user_id: str, specialist: dict, declined: bool = False) -> FlowStep:
    slot = specialist["available_slot"]
    return FlowStep(offer_reason(specialist["name"]),
                    offer_action(specialist["name"], slot, declined),
                    "get_input_from_user",
                    {"user_id": user_id,
                     "questions": offer_question(specialist["name"], slot)})


def clarify_step(user_id: str, reason: str, action: str, question: str) -> FlowStep:
    return FlowStep(reason, action, "get_input_from_user",
                    {"user_id": user_id, "questions": question})


CONFIRM_STEP = ("User has confirmed the appointment",
                "I should confirm the appointment")
SAVE_STEP = ("Appointment confirmed. Next, I should save the appointment history.",
             "Save the appointment history.")
STORE_STEP = ("Appointment confirmed and stored.",
              "Also store the current symptoms for future reference.")
NOTIFY_CONFIRMED_STEP = ("Appointment confirmed and symptoms stored.",
                         "Inform the user of the successful booking.")
BOOKED_END_STEP = ("The task is completed successfully.", END_ACTION)

DECLINE_STORE_STEP = ("User has declined the appointment.",
                      "Proceed to store the symptoms for future reference "
                      "without scheduling an appointment.")
DECLINE_NOTIFY_STEP = ("Symptoms stored successfully.",
                       "Inform the user that the symptoms have been recorded "
                       "for future reference.")
DECLINED_END_STEP = ("The process is completed with symptoms stored and "
                     "user notified.", END_ACTION)


def booking_tail(user_id: str, symptoms: str, specialist: dict, accept: bool,
                 timestamp: str) -> list[FlowStep]:
    """The steps after the user answers the appointment offer."""
    if not accept:
        return [
            FlowStep(*DECLINE_STORE_STEP, "store_symptoms",
                     {"user_id": user_id, "symptoms": symptoms,
                      "timestamp": timestamp}),
            FlowStep(*DECLINE_NOTIFY_STEP, "notify_user",
                     {"user_id": user_id, "message": BOOKING_DECLINED_TEXT}),
            FlowStep(*DECLINED_END_STEP),
        ]
    slot = specialist["available_slot"]
    return [
        FlowStep(*CONFIRM_STEP, "confirm_appointment",
                 {"user_id": user_id,
                  "specialist_id": specialist["specialist_id"],
                  "appointment_time_date": appointment_stamp(slot)}),
        FlowStep(*SAVE_STEP, "save_appointment_history",
                 {"user_id": user_id, "symptoms": symptoms,
                  "specialist_id": specialist["specialist_id"],
                  "appointment_time_date": appointment_stamp(slot)}),
        FlowStep(*STORE_STEP, "store_symptoms",
                 {"user_id": user_id, "symptoms": symptoms,
                  "timestamp": timestamp}),
        FlowStep(*NOTIFY_CONFIRMED_STEP, "notify_user",
                 {"user_id": user_id,
                  "message": booking_confirmed_text(specialist["name"], slot)}),
        FlowStep(*BOOKED_END_STEP),
    ]


def booking_sequence(user_id: str, symptoms: str, specialization: str,
                     specialist: dict, accept: bool, timestamp: str,
                     report_reason: str, records_lead: str,
                     clarifications: list[tuple[str, str, str]] | None = None,
                     ) -> list[FlowStep]:
    """The full booking flow as enacted steps.

    ``specialist`` is the get_available_specialists result (id, name,
    available_slot). ``clarifications`` are (reason, action, question)
    rounds preceding the search; when present they replace the history
    retrieval, since the interview already established the complaint.
    """
    steps: list[FlowStep] = []
    if clarifications:
        for reason, action, question in clarifications:
            steps.append(clarify_step(user_id, reason, action, question))
    else:
        steps.append(retrieve_step(user_id, symptoms, report_reason))
    steps.append(search_step(symptoms, specialization,
                             search_reason(records_lead, specialization)))
    steps.append(offer_step(user_id, specialist, declined=not accept))
    steps.extend(booking_tail(user_id, symptoms, specialist, accept, timestamp))
    return steps
