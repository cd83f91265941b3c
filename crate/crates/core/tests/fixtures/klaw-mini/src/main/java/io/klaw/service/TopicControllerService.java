package io.klaw.service;

import io.klaw.model.OrderBy;
import io.klaw.repo.ManageDatabase;
import org.springframework.security.core.userdetails.UserDetails;

public class TopicControllerService {
    private final ManageDatabase manageDatabase;
    private final MailService mailService;

    public TopicControllerService(ManageDatabase manageDatabase, MailService mailService) {
        this.manageDatabase = manageDatabase;
        this.mailService = mailService;
    }

    public String deleteTopicRequests(String topicId) {
        String userName = getUserName();
        return manageDatabase.deleteTopicRequest(Integer.parseInt(topicId), userName);
    }

    public OrderBy defaultOrder() {
        return OrderBy.NEWEST_FIRST;
    }

    private String getUserName() {
        return mailService.getUserName();
    }

    UserDetails principal() {
        return null;
    }
}
